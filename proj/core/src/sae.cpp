#include "latentforge/sae.hpp"

#include <Eigen/Core>
#include <cmath>
#include <iostream>
#include <numeric>

#include "latentforge/adam.hpp"
#include "latentforge/checkpoint.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/graph.hpp"
#include "latentforge/rng.hpp"

namespace latentforge {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapMat = Eigen::Map<const RowMat>;
using MapMat = Eigen::Map<RowMat>;

CMapMat as_mat(const Tensor& t) { return CMapMat(t.data(), t.rows(), t.cols()); }
MapMat as_mat(Tensor& t) { return MapMat(t.data(), t.rows(), t.cols()); }

void check_vec(const Tensor& a, int want, const char* who) {
  if (a.rank() != 1 || a.dim(0) != want)
    throw ContractViolation(std::string(who) + ": expected vector of width " +
                            std::to_string(want) + ", got " + a.shape_str());
}

}  // namespace

Tensor encode_pre(const SaeParams& sae, const Tensor& a) {
  check_vec(a, sae.d, "encode_pre");
  Tensor out({sae.m});
  Eigen::Map<Eigen::VectorXf>(out.data(), sae.m).noalias() =
      as_mat(sae.w_enc).transpose() * Eigen::Map<const Eigen::VectorXf>(a.data(), sae.d);
  for (int j = 0; j < sae.m; ++j) out[j] += sae.b_enc[j];
  return out;
}

Tensor encode_post(const SaeParams& sae, const Tensor& a) {
  Tensor z = encode_pre(sae, a);
  for (int j = 0; j < sae.m; ++j)
    if (!(z[j] > sae.theta[j])) z[j] = 0.0f;
  return z;
}

Tensor decode(const SaeParams& sae, const Tensor& z_post) {
  check_vec(z_post, sae.m, "decode");
  Tensor out({sae.d});
  Eigen::Map<Eigen::VectorXf>(out.data(), sae.d).noalias() =
      as_mat(sae.w_dec).transpose() * Eigen::Map<const Eigen::VectorXf>(z_post.data(), sae.m);
  for (int c = 0; c < sae.d; ++c) out[c] += sae.b_dec[c];
  return out;
}

Tensor encode_pre_batch(const SaeParams& sae, const Tensor& acts) {
  if (acts.rank() != 2 || acts.cols() != sae.d)
    throw ContractViolation("encode_pre_batch: want [n," + std::to_string(sae.d) + "], got " +
                            acts.shape_str());
  Tensor out({acts.rows(), sae.m});
  as_mat(out).noalias() = as_mat(acts) * as_mat(sae.w_enc);
  for (int r = 0; r < out.rows(); ++r)
    for (int j = 0; j < sae.m; ++j) out[static_cast<int64_t>(r) * sae.m + j] += sae.b_enc[j];
  return out;
}

Tensor encode_post_batch(const SaeParams& sae, const Tensor& acts) {
  Tensor z = encode_pre_batch(sae, acts);
  for (int r = 0; r < z.rows(); ++r)
    for (int j = 0; j < sae.m; ++j) {
      int64_t i = static_cast<int64_t>(r) * sae.m + j;
      if (!(z[i] > sae.theta[j])) z[i] = 0.0f;
    }
  return z;
}

SaeParams train_sae(const Tensor& activations, const SaeTrainConfig& cfg, int layer) {
  if (activations.rank() != 2) throw ContractViolation("train_sae: activations must be [n,d]");
  int n = activations.rows(), d = activations.cols();
  if (n < 2 || d < 1) throw ContractViolation("train_sae: too few samples");
  if (cfg.epochs < 1 || cfg.lr <= 0.0f || cfg.lambda_s < 0.0f || cfg.expansion < 1 ||
      cfg.batch < 1 || cfg.bandwidth <= 0.0f || cfg.theta_init <= 0.0f)
    throw ContractViolation("train_sae: bad config");
  int m = cfg.expansion * d;
  if (n < 10 * m)
    std::cerr << "warning: train_sae has " << n << " samples for m=" << m
              << " latents (recommend >= " << 10 * m << ")\n";

  Rng root(cfg.seed);
  Rng r_init = root.split(0);
  Rng r_shuffle = root.split(1);

  SaeParams sae;
  sae.layer = layer;
  sae.d = d;
  sae.m = m;
  sae.w_dec = Tensor::randn({m, d}, r_init, 1.0f);
  for (int j = 0; j < m; ++j) {
    double norm = 0.0;
    for (int c = 0; c < d; ++c) norm += static_cast<double>(sae.w_dec.at(j, c)) * sae.w_dec.at(j, c);
    float inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (int c = 0; c < d; ++c) sae.w_dec.at(j, c) *= inv;
  }
  sae.w_enc = Tensor({d, m});
  for (int r = 0; r < d; ++r)
    for (int j = 0; j < m; ++j) sae.w_enc.at(r, j) = sae.w_dec.at(j, r);
  sae.b_enc = Tensor::zeros({m});
  sae.b_dec = Tensor::zeros({d});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) sae.b_dec[c] += activations.at(r, c);
  for (int c = 0; c < d; ++c) sae.b_dec[c] /= static_cast<float>(n);
  sae.theta = Tensor::full({m}, cfg.theta_init);

  std::vector<Tensor*> params = {&sae.w_enc, &sae.b_enc, &sae.w_dec, &sae.b_dec, &sae.theta};
  AdamState adam(params);

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    r_shuffle.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      int bs = static_cast<int>(end - start);
      Tensor batch({bs, d});
      for (int r = 0; r < bs; ++r)
        for (int c = 0; c < d; ++c)
          batch.at(r, c) = activations.at(order[start + static_cast<size_t>(r)], c);

      Graph g;
      NodeId acts = g.leaf(std::move(batch), false, "acts");
      NodeId w_enc = g.leaf(sae.w_enc, true, "w_enc");
      NodeId b_enc = g.leaf(sae.b_enc, true, "b_enc");
      NodeId w_dec = g.leaf(sae.w_dec, true, "w_dec");
      NodeId b_dec = g.leaf(sae.b_dec, true, "b_dec");
      NodeId theta = g.leaf(sae.theta, true, "theta");

      NodeId z_pre = g.add_row(g.matmul(acts, w_enc), b_enc);
      NodeId z_post = g.jump_relu(z_pre, theta, cfg.bandwidth);
      NodeId recon = g.add_row(g.matmul(z_post, w_dec), b_dec);
      NodeId diff = g.sub(recon, acts);
      NodeId mse = g.mean(g.mul(diff, diff));
      NodeId l0 = g.jump_count_mean(z_pre, theta, cfg.bandwidth);
      NodeId loss = g.add(mse, g.scale(l0, cfg.lambda_s));

      GradientMap gm = g.backward(loss);
      NodeId ids[5] = {w_enc, b_enc, w_dec, b_dec, theta};
      std::vector<const Tensor*> grads(5, nullptr);
      for (int i = 0; i < 5; ++i)
        if (gm.contains(ids[i])) grads[static_cast<size_t>(i)] = &gm.at(ids[i]);
      adam.step(params, grads, cfg.lr);

      // Invariants restored after each step: unit decoder rows, theta > 0.
      for (int j = 0; j < m; ++j) {
        double norm = 0.0;
        for (int c = 0; c < d; ++c)
          norm += static_cast<double>(sae.w_dec.at(j, c)) * sae.w_dec.at(j, c);
        if (norm > 0.0) {
          float inv = static_cast<float>(1.0 / std::sqrt(norm));
          for (int c = 0; c < d; ++c) sae.w_dec.at(j, c) *= inv;
        }
        if (sae.theta[j] < 1e-6f) sae.theta[j] = 1e-6f;
      }
    }
  }
  return sae;
}

double explained_variance(const SaeParams& sae, const Tensor& acts) {
  if (acts.rank() != 2 || acts.cols() != sae.d || acts.rows() < 1)
    throw ContractViolation("explained_variance: bad activations shape");
  int n = acts.rows(), d = acts.cols();
  std::vector<double> mean(static_cast<size_t>(d), 0.0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) mean[static_cast<size_t>(c)] += acts.at(r, c);
  for (int c = 0; c < d; ++c) mean[static_cast<size_t>(c)] /= n;

  Tensor z = encode_post_batch(sae, acts);
  Tensor rec({n, d});
  as_mat(rec).noalias() = as_mat(z) * as_mat(sae.w_dec);
  double err = 0.0, var = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) {
      double e = static_cast<double>(acts.at(r, c)) - (rec.at(r, c) + sae.b_dec[c]);
      err += e * e;
      double v = static_cast<double>(acts.at(r, c)) - mean[static_cast<size_t>(c)];
      var += v * v;
    }
  if (var == 0.0) return err == 0.0 ? 1.0 : 0.0;
  return 1.0 - err / var;
}

double mean_l0(const SaeParams& sae, const Tensor& acts) {
  if (acts.rank() != 2 || acts.cols() != sae.d || acts.rows() < 1)
    throw ContractViolation("mean_l0: bad activations shape");
  Tensor z = encode_pre_batch(sae, acts);
  int n = z.rows();
  int64_t count = 0;
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < sae.m; ++j)
      if (z[static_cast<int64_t>(r) * sae.m + j] > sae.theta[j]) ++count;
  return static_cast<double>(count) / static_cast<double>(n);
}

void save_saes(const std::string& path, const std::vector<SaeParams>& saes) {
  if (saes.empty()) throw ContractViolation("save_saes: nothing to save");
  CheckpointHeader h;
  h.d = static_cast<uint32_t>(saes[0].d);
  h.n_layers = static_cast<uint32_t>(saes.size());
  h.vocab = static_cast<uint32_t>(saes[0].m);
  h.maxlen = 0;
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const SaeParams& s : saes) {
    std::string pre = "sae" + std::to_string(s.layer) + ".";
    tensors.emplace_back(pre + "w_enc", &s.w_enc);
    tensors.emplace_back(pre + "b_enc", &s.b_enc);
    tensors.emplace_back(pre + "w_dec", &s.w_dec);
    tensors.emplace_back(pre + "b_dec", &s.b_dec);
    tensors.emplace_back(pre + "theta", &s.theta);
  }
  write_checkpoint(path, h, tensors);
}

std::vector<SaeParams> load_saes(const std::string& path) {
  LoadedCheckpoint ck = read_checkpoint(path);
  std::vector<SaeParams> out;
  for (uint32_t l = 1; l <= ck.header.n_layers; ++l) {
    std::string pre = "sae" + std::to_string(l) + ".";
    SaeParams s;
    s.layer = static_cast<int>(l);
    s.w_enc = ck.get(pre + "w_enc");
    s.b_enc = ck.get(pre + "b_enc");
    s.w_dec = ck.get(pre + "w_dec");
    s.b_dec = ck.get(pre + "b_dec");
    s.theta = ck.get(pre + "theta");
    s.d = s.w_enc.rows();
    s.m = s.w_enc.cols();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace latentforge
