#include "scd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "scd/losses.hpp"
#include "scd/optim.hpp"

namespace scd {

SimilarityMode similarity_mode_from_string(const std::string& s) {
  if (s == "literal") return SimilarityMode::Literal;
  if (s == "corrected") return SimilarityMode::Corrected;
  throw ConfigError("similarity mode must be 'literal' or 'corrected', got '" + s + "'");
}

std::string SimilarityTerms::str() const {
  std::string out;
  if (spleen) out += "spleen";
  if (hypo) out += out.empty() ? "hypo" : "+hypo";
  if (hyper) out += out.empty() ? "hyper" : "+hyper";
  return out;
}

double similarity(const SimilarityInputs& a, const SimilarityInputs& b, double lambda,
                  SimilarityMode mode, const SimilarityTerms& terms) {
  if (lambda < 0.0) throw ConfigError("similarity lambda must be non-negative");
  terms.validate();
  if (a.h_hat[0] < 0.0f || a.h_hat[1] < 0.0f || b.h_hat[0] < 0.0f || b.h_hat[1] < 0.0f)
    throw DataError("similarity h_hat entries must be non-negative");
  double sq = 0.0;
  if (terms.hypo) {
    double d = double(a.h_hat[0]) - double(b.h_hat[0]);
    sq += d * d;
  }
  if (terms.hyper) {
    double d = double(a.h_hat[1]) - double(b.h_hat[1]);
    sq += d * d;
  }
  double dist = std::sqrt(sq);
  double bracket = 0.0;
  if (terms.spleen) {
    bool equal = a.spleen == b.spleen;
    bracket = (mode == SimilarityMode::Literal ? equal : !equal) ? 1.0 : 0.0;
  }
  return std::exp(-(dist + lambda * bracket));
}

void PopulationGraph::set_masks(const std::vector<uint8_t>& train,
                                const std::vector<uint8_t>& test) {
  if (int64_t(train.size()) != n || int64_t(test.size()) != n)
    throw ShapeError("mask length does not match node count");
  for (int64_t i = 0; i < n; ++i) {
    if (train[size_t(i)] && test[size_t(i)])
      throw UsageError("node " + std::to_string(i) + " is in both masks");
    if (labels[size_t(i)] >= 0 && !train[size_t(i)] && !test[size_t(i)])
      throw UsageError("labeled node " + std::to_string(i) + " is in neither mask");
  }
  train_mask = train;
  test_mask = test;
}

std::vector<std::array<float, 2>> resolve_h(const std::vector<Sample>& samples,
                                            const HSource& source) {
  std::vector<std::array<float, 2>> h(samples.size());
  switch (source.kind) {
    case HSource::Kind::Estimated: {
      if (!source.chrome || !source.chrome->trained)
        throw UsageError("Estimated h_source requires a trained chrome net");
      for (size_t i = 0; i < samples.size(); ++i) {
        ChromeEstimate e = predict_chrome(*source.chrome, samples[i].image);
        h[i] = {e.hypo_pct, e.hyper_pct};
      }
      break;
    }
    case HSource::Kind::Groundtruth: {
      for (size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].lab)
          throw DataError("sample '" + samples[i].sample_id + "' lacks lab values");
        h[i] = {samples[i].lab->hypo_pct, samples[i].lab->hyper_pct};
      }
      break;
    }
    case HSource::Kind::Randomized: {
      // Uniform draws within the observed label ranges: keeps the marginal
      // scale but destroys the per-patient signal.
      float lo0 = 0.0f, hi0 = 0.0f, lo1 = 0.0f, hi1 = 0.0f;
      bool first = true;
      for (const auto& s : samples) {
        if (!s.lab) throw DataError("sample '" + s.sample_id + "' lacks lab values");
        if (first) {
          lo0 = hi0 = s.lab->hypo_pct;
          lo1 = hi1 = s.lab->hyper_pct;
          first = false;
        } else {
          lo0 = std::min(lo0, s.lab->hypo_pct);
          hi0 = std::max(hi0, s.lab->hypo_pct);
          lo1 = std::min(lo1, s.lab->hyper_pct);
          hi1 = std::max(hi1, s.lab->hyper_pct);
        }
      }
      Rng rng(derive_seed(source.seed, 0x72616e64ULL));
      for (size_t i = 0; i < samples.size(); ++i)
        h[i] = {float(rng.uniform(lo0, hi0)), float(rng.uniform(lo1, hi1))};
      break;
    }
  }
  return h;
}

PopulationGraph build_graph(const std::vector<Sample>& samples, const Tensor<float>& features,
                            const HSource& source, double lambda, SimilarityMode mode,
                            const SimilarityTerms& terms) {
  if (samples.empty()) throw DataError("cannot build a graph with no samples");
  if (features.rank() != 2 || features.dim(0) != int64_t(samples.size()))
    throw ShapeError("features must be [n," + std::to_string(features.rank() == 2 ? features.dim(1) : 0) +
                     "] aligned with samples");
  auto h = resolve_h(samples, source);

  PopulationGraph g;
  g.n = int64_t(samples.size());
  g.adjacency = Tensor<double>({g.n, g.n});
  g.features = features;
  g.labels.resize(samples.size());
  g.train_mask.assign(samples.size(), 0);
  g.test_mask.assign(samples.size(), 0);
  for (size_t i = 0; i < samples.size(); ++i) {
    g.labels[i] = samples[i].severity ? *samples[i].severity : -1;
    g.train_mask[i] = samples[i].severity ? 1 : 0;
    g.sample_ids.push_back(samples[i].sample_id);
  }
  // upper triangle, mirrored: exact symmetry by construction
  for (int64_t i = 0; i < g.n; ++i) {
    for (int64_t j = i + 1; j < g.n; ++j) {
      SimilarityInputs a{h[size_t(i)], samples[size_t(i)].spleen};
      SimilarityInputs b{h[size_t(j)], samples[size_t(j)].spleen};
      double w = similarity(a, b, lambda, mode, terms);
      g.adjacency[i * g.n + j] = w;
      g.adjacency[j * g.n + i] = w;
    }
  }
  return g;
}

Tensor<double> normalize_propagation(const Tensor<double>& adj) {
  if (adj.rank() != 2 || adj.dim(0) != adj.dim(1))
    throw ShapeError("adjacency must be square, got " + adj.shape_str());
  int64_t n = adj.dim(0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      if (adj[i * n + j] < 0.0) throw DataError("adjacency must be non-negative");
      if (std::abs(adj[i * n + j] - adj[j * n + i]) > 1e-12)
        throw DataError("adjacency must be symmetric");
    }
  Tensor<double> ahat({n, n});
  std::vector<double> dinv(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop
    for (int64_t j = 0; j < n; ++j) deg += adj[i * n + j];
    dinv[size_t(i)] = 1.0 / std::sqrt(deg);
  }
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double a = adj[i * n + j] + (i == j ? 1.0 : 0.0);
      ahat[i * n + j] = dinv[size_t(i)] * a * dinv[size_t(j)];
    }
  return ahat;
}

namespace {

// Propagation basis: {Â} for first order, else Chebyshev polynomials
// T_0..T_q of the rescaled Laplacian of the (un-self-looped) normalized graph.
std::vector<Tensor<double>> make_basis(const Tensor<double>& adj, int cheb_order) {
  if (cheb_order < 1) throw ConfigError("cheb_order must be >= 1");
  if (cheb_order == 1) return {normalize_propagation(adj)};
  int64_t n = adj.dim(0);
  // L = I - D^{-1/2} A D^{-1/2} with degree floored at a tiny value so
  // isolated nodes stay well-defined
  Tensor<double> lap({n, n});
  std::vector<double> dinv(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int64_t j = 0; j < n; ++j) deg += adj[i * n + j];
    dinv[size_t(i)] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      lap[i * n + j] = (i == j ? 1.0 : 0.0) - dinv[size_t(i)] * adj[i * n + j] * dinv[size_t(j)];
  // λ_max of a normalized Laplacian is ≤ 2; the fixed bound keeps the basis
  // deterministic without an eigensolve
  double lmax = 2.0;
  Tensor<double> lt({n, n});
  for (int64_t i = 0; i < n * n; ++i) lt[i] = 2.0 / lmax * lap[i];
  for (int64_t i = 0; i < n; ++i) lt[i * n + i] -= 1.0;

  std::vector<Tensor<double>> basis;
  Tensor<double> t0({n, n});
  for (int64_t i = 0; i < n; ++i) t0[i * n + i] = 1.0;
  basis.push_back(t0);
  basis.push_back(lt);
  for (int k = 2; k <= cheb_order; ++k) {
    Tensor<double> tk({n, n});
    as_matrix2d(tk).noalias() = 2.0 * as_matrix2d(lt) * as_matrix2d(basis[size_t(k - 1)]);
    for (int64_t i = 0; i < n * n; ++i) tk[i] -= basis[size_t(k - 2)][i];
    basis.push_back(std::move(tk));
  }
  return basis;
}

struct GcnCache {
  std::vector<std::vector<Tensor<double>>> px;  // per layer, per basis: P_b · input
  std::vector<Tensor<double>> pre;              // pre-activation per layer
  std::vector<Tensor<double>> mask;             // dropout masks (hidden layers)
};

Tensor<double> gcn_forward(const GCNModel& m, const Tensor<double>& x, bool training, Rng* rng,
                           GcnCache* cache) {
  size_t layers = m.weights.size();
  Tensor<double> cur = x;
  for (size_t l = 0; l < layers; ++l) {
    int64_t out_dim = m.weights[l][0].dim(1);
    Tensor<double> z({cur.dim(0), out_dim});
    auto zm = as_matrix2d(z);
    zm.setZero();
    std::vector<Tensor<double>> pxs;
    for (size_t b = 0; b < m.basis.size(); ++b) {
      Tensor<double> px({cur.dim(0), cur.dim(1)});
      as_matrix2d(px).noalias() = as_matrix2d(m.basis[b]) * as_matrix2d(cur);
      zm.noalias() += as_matrix2d(px) * as_matrix2d(m.weights[l][b]);
      if (cache) pxs.push_back(std::move(px));
    }
    for (int64_t i = 0; i < z.dim(0); ++i)
      for (int64_t j = 0; j < out_dim; ++j) z[i * out_dim + j] += m.bias[l][j];
    if (cache) {
      cache->px.push_back(std::move(pxs));
      cache->pre.push_back(z);
    }
    if (l + 1 == layers) return z;  // logits
    Tensor<double> a = z;
    for (int64_t i = 0; i < a.numel(); ++i)
      if (a[i] < 0.0) a[i] = 0.0;
    if (training && m.config.dropout > 0.0) {
      Tensor<double> mask(a.shape());
      double keep = 1.0 - m.config.dropout;
      for (int64_t i = 0; i < a.numel(); ++i) {
        mask[i] = rng->uniform() < m.config.dropout ? 0.0 : 1.0 / keep;
        a[i] *= mask[i];
      }
      if (cache) cache->mask.push_back(std::move(mask));
    } else if (cache) {
      Tensor<double> mask(a.shape());
      mask.fill(1.0);
      cache->mask.push_back(std::move(mask));
    }
    cur = std::move(a);
  }
  return cur;
}

}  // namespace

GCNModel train_gcn(const PopulationGraph& graph, const GcnConfig& cfg, uint64_t seed,
                   std::vector<double>* loss_trace) {
  if (graph.n < 2) throw DataError("GCN training needs at least 2 nodes");
  if (graph.train_mask.empty()) throw UsageError("graph has no masks set");
  int num_classes = 0;
  for (int64_t i = 0; i < graph.n; ++i)
    if (graph.labels[size_t(i)] >= 0) num_classes = std::max(num_classes, graph.labels[size_t(i)] + 1);
  if (num_classes < 2) throw DataError("GCN training needs at least 2 classes");
  std::vector<int> seen(size_t(num_classes), 0);
  int train_nodes = 0;
  for (int64_t i = 0; i < graph.n; ++i)
    if (graph.train_mask[size_t(i)]) {
      if (graph.labels[size_t(i)] < 0)
        throw DataError("train mask selects unlabeled node " + std::to_string(i));
      seen[size_t(graph.labels[size_t(i)])] = 1;
      ++train_nodes;
    }
  if (train_nodes == 0) throw DataError("train mask selects no nodes");
  for (int c = 0; c < num_classes; ++c)
    if (!seen[size_t(c)])
      throw DataError("class " + std::to_string(c) + " is absent from the train mask");

  GCNModel m;
  m.config = cfg;
  m.in_dim = int(graph.features.dim(1));
  m.num_classes = num_classes;
  m.basis = make_basis(graph.adjacency, cfg.cheb_order);

  Rng init(derive_seed(seed, 0x67636e69ULL));
  int dims[4] = {m.in_dim, cfg.hidden, cfg.hidden, num_classes};
  for (int l = 0; l < 3; ++l) {
    std::vector<Tensor<double>> ws;
    for (size_t b = 0; b < m.basis.size(); ++b) {
      Tensor<double> w({dims[l], dims[l + 1]});
      double limit = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
      for (int64_t i = 0; i < w.numel(); ++i) w[i] = init.uniform(-limit, limit);
      ws.push_back(std::move(w));
    }
    m.weights.push_back(std::move(ws));
    m.bias.push_back(Tensor<double>({dims[l + 1]}));
  }

  Tensor<double> x = graph.features.template cast<double>();
  std::vector<nn::NamedParam<double>> params;
  std::vector<Tensor<double>> grads;
  // stable parameter order: per layer, per basis weight, then bias
  for (size_t l = 0; l < m.weights.size(); ++l) {
    for (size_t b = 0; b < m.weights[l].size(); ++b) grads.emplace_back(m.weights[l][b].shape());
    grads.emplace_back(m.bias[l].shape());
  }
  size_t gi = 0;
  for (size_t l = 0; l < m.weights.size(); ++l) {
    for (size_t b = 0; b < m.weights[l].size(); ++b)
      params.push_back({"gc" + std::to_string(l) + ".w" + std::to_string(b), &m.weights[l][b],
                        &grads[gi++]});
    params.push_back({"gc" + std::to_string(l) + ".b", &m.bias[l], &grads[gi++]});
  }

  nn::Adam<double> opt(cfg.lr, false);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng drop_rng(derive_seed(seed, 0x64726f70ULL, uint64_t(epoch)));
    GcnCache cache;
    Tensor<double> logits = gcn_forward(m, x, true, &drop_rng, &cache);
    auto loss = nn::masked_cross_entropy(logits, graph.labels, graph.train_mask);
    if (loss_trace) loss_trace->push_back(loss.value);

    for (auto& g : grads) g.fill(0.0);
    Tensor<double> dz = loss.grad;
    for (size_t l = m.weights.size(); l-- > 0;) {
      size_t base = 0;
      for (size_t ll = 0; ll < l; ++ll) base += m.weights[ll].size() + 1;
      // dW_b = (P_b · input)ᵀ dZ ; db = column sums of dZ
      for (size_t b = 0; b < m.weights[l].size(); ++b)
        as_matrix2d(grads[base + b]).noalias() +=
            as_matrix2d(cache.px[l][b]).transpose() * as_matrix2d(dz);
      auto dbm = as_matrix2d(dz);
      for (int64_t j = 0; j < grads[base + m.weights[l].size()].numel(); ++j)
        grads[base + m.weights[l].size()][j] = dbm.col(j).sum();
      if (l == 0) break;
      // input gradient: Σ_b P_bᵀ dZ W_bᵀ, then dropout mask and ReLU gate
      Tensor<double> dx({x.dim(0), m.weights[l][0].dim(0)});
      as_matrix2d(dx).setZero();
      for (size_t b = 0; b < m.weights[l].size(); ++b) {
        Tensor<double> tmp({x.dim(0), m.weights[l][b].dim(1)});
        as_matrix2d(tmp).noalias() = as_matrix2d(m.basis[b]).transpose() * as_matrix2d(dz);
        as_matrix2d(dx).noalias() += as_matrix2d(tmp) * as_matrix2d(m.weights[l][b]).transpose();
      }
      for (int64_t i = 0; i < dx.numel(); ++i) {
        dx[i] *= cache.mask[l - 1][i];
        if (cache.pre[l - 1][i] <= 0.0) dx[i] = 0.0;
      }
      dz = std::move(dx);
    }
    opt.step(params);
  }
  return m;
}

GcnPrediction predict_gcn(const GCNModel& model, const PopulationGraph& graph) {
  if (graph.features.dim(1) != model.in_dim)
    throw ShapeError("graph features have dim " + std::to_string(graph.features.dim(1)) +
                     ", model expects " + std::to_string(model.in_dim));
  // Rebuild the propagation basis from the graph at hand so a query node
  // attached to the stored training graph is propagated correctly.
  GCNModel scratch = model;
  scratch.basis = make_basis(graph.adjacency, model.config.cheb_order);
  Tensor<double> x = graph.features.template cast<double>();
  Tensor<double> logits = gcn_forward(scratch, x, false, nullptr, nullptr);
  int64_t n = logits.dim(0), k = logits.dim(1);
  GcnPrediction pred;
  pred.probabilities = Tensor<double>({n, k});
  pred.labels.resize(size_t(n));
  for (int64_t i = 0; i < n; ++i) {
    const double* z = logits.data() + i * k;
    double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int64_t c = 0; c < k; ++c) sum += std::exp(z[c] - mx);
    int best = 0;
    for (int64_t c = 0; c < k; ++c) {
      pred.probabilities[i * k + c] = std::exp(z[c] - mx) / sum;
      if (z[c] > z[best]) best = int(c);
    }
    pred.labels[size_t(i)] = best;
  }
  return pred;
}

void export_graph(const PopulationGraph& graph, const std::filesystem::path& edges_csv,
                  const std::filesystem::path& nodes_csv) {
  std::ofstream ef(edges_csv);
  if (!ef) throw IoError("cannot write " + edges_csv.string());
  ef << "src,dst,weight\n";
  char buf[64];
  for (int64_t i = 0; i < graph.n; ++i)
    for (int64_t j = i + 1; j < graph.n; ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", graph.adjacency[i * graph.n + j]);
      ef << graph.sample_ids[size_t(i)] << ',' << graph.sample_ids[size_t(j)] << ',' << buf
         << "\n";
    }
  if (!ef.flush()) throw IoError("write failure on " + edges_csv.string());

  std::ofstream nf(nodes_csv);
  if (!nf) throw IoError("cannot write " + nodes_csv.string());
  nf << "sample_id,label,mask\n";
  for (int64_t i = 0; i < graph.n; ++i) {
    nf << graph.sample_ids[size_t(i)] << ',';
    if (graph.labels[size_t(i)] >= 0) nf << graph.labels[size_t(i)];
    nf << ',';
    if (!graph.train_mask.empty() && graph.train_mask[size_t(i)]) nf << "train";
    else if (!graph.test_mask.empty() && graph.test_mask[size_t(i)]) nf << "test";
    else nf << "none";
    nf << "\n";
  }
  if (!nf.flush()) throw IoError("write failure on " + nodes_csv.string());
}

}  // namespace scd
