#include "latentforge/recognition.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

void check_saes(const ModelParams& params, const std::vector<SaeParams>& saes) {
  if (static_cast<int>(saes.size()) != params.n_layers)
    throw ContractViolation("need one SAE per layer: have " + std::to_string(saes.size()) +
                            ", model has " + std::to_string(params.n_layers));
  for (size_t i = 0; i < saes.size(); ++i) {
    if (saes[i].layer != static_cast<int>(i) + 1)
      throw ContractViolation("SAE at position " + std::to_string(i) + " claims layer " +
                              std::to_string(saes[i].layer));
    if (saes[i].d != params.d_model)
      throw ContractViolation("SAE width does not match the model");
  }
}

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

Tensor activation_frequencies(const ModelParams& params, const std::vector<SaeParams>& saes,
                              const std::vector<std::vector<int>>& entities) {
  check_saes(params, saes);
  if (entities.empty()) throw ContractViolation("activation_frequencies: empty entity list");
  int L = params.n_layers, m = saes[0].m;
  Tensor freq({L, m});
  for (const auto& name : entities) {
    std::vector<int> x;
    x.reserve(name.size() + 1);
    x.push_back(Vocabulary::kBos);
    x.insert(x.end(), name.begin(), name.end());
    ForwardResult r = forward(params, x);
    for (int l = 0; l < L; ++l) {
      const Tensor& al = r.trace.a[static_cast<size_t>(l)];
      Tensor h({params.d_model});
      int last = al.rows() - 1;
      for (int c = 0; c < params.d_model; ++c) h[c] = al.at(last, c);
      Tensor z = encode_pre(saes[static_cast<size_t>(l)], h);
      for (int j = 0; j < m; ++j)
        if (z[j] > saes[static_cast<size_t>(l)].theta[j])
          freq.at(l, j) += 1.0f;
    }
  }
  float inv = 1.0f / static_cast<float>(entities.size());
  for (int64_t i = 0; i < freq.size(); ++i) freq[i] *= inv;
  return freq;
}

Tensor recognition_scores(const Tensor& r_known, const Tensor& r_unknown) {
  if (!r_known.same_shape(r_unknown))
    throw ContractViolation("recognition_scores: shape mismatch " + r_known.shape_str() +
                            " vs " + r_unknown.shape_str());
  Tensor s = r_known;
  for (int64_t i = 0; i < s.size(); ++i) s[i] -= r_unknown[i];
  return s;
}

RecognitionLatentSets select_latents(const Tensor& scores, float tau) {
  if (scores.rank() != 2) throw ContractViolation("select_latents: scores must be L x m");
  if (!(tau > 0.0f && tau < 1.0f))
    throw ContractViolation("select_latents: tau must lie in (0,1)");
  RecognitionLatentSets out;
  out.tau = tau;
  out.scores = scores;
  int L = scores.rows(), m = scores.cols();
  out.known.resize(static_cast<size_t>(L));
  out.unknown.resize(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < m; ++j) {
      float s = scores.at(l, j);
      if (s > tau) out.known[static_cast<size_t>(l)].push_back(j);
      else if (s < -tau) out.unknown[static_cast<size_t>(l)].push_back(j);
    }
  return out;
}

TopLatents top_latents(const Tensor& scores, int layer, int k) {
  if (scores.rank() != 2) throw ContractViolation("top_latents: scores must be L x m");
  int L = scores.rows(), m = scores.cols();
  if (layer < 1 || layer > L) throw ContractViolation("top_latents: layer out of range");
  if (k < 0 || k > m) throw ContractViolation("top_latents: k out of range");
  std::vector<int> idx(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) idx[static_cast<size_t>(j)] = j;
  TopLatents out;
  std::vector<int> by_desc = idx;
  std::stable_sort(by_desc.begin(), by_desc.end(), [&](int a, int b) {
    float sa = scores.at(layer - 1, a), sb = scores.at(layer - 1, b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  std::vector<int> by_asc = idx;
  std::stable_sort(by_asc.begin(), by_asc.end(), [&](int a, int b) {
    float sa = scores.at(layer - 1, a), sb = scores.at(layer - 1, b);
    if (sa != sb) return sa < sb;
    return a < b;
  });
  out.known.assign(by_desc.begin(), by_desc.begin() + k);
  out.unknown.assign(by_asc.begin(), by_asc.begin() + k);
  return out;
}

std::string serialize_latents(const RecognitionLatentSets& sets) {
  std::ostringstream os;
  os << "latents v1 tau=" << fmt_float(sets.tau) << " layers=" << sets.n_layers()
     << " latents=" << sets.n_latents() << "\n";
  for (int l = 0; l < sets.n_layers(); ++l) {
    for (int j : sets.known[static_cast<size_t>(l)])
      os << "layer " << (l + 1) << " kind k latent " << j << " score "
         << fmt_float(sets.scores.at(l, j)) << "\n";
    for (int j : sets.unknown[static_cast<size_t>(l)])
      os << "layer " << (l + 1) << " kind u latent " << j << " score "
         << fmt_float(sets.scores.at(l, j)) << "\n";
  }
  return os.str();
}

RecognitionLatentSets parse_latents(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty latents file");
  float tau = 0.0f;
  int L = 0, m = 0;
  if (std::sscanf(line.c_str(), "latents v1 tau=%f layers=%d latents=%d", &tau, &L, &m) != 3)
    throw ParseError("bad latents header '" + line + "'", 1);
  RecognitionLatentSets out;
  out.tau = tau;
  out.scores = Tensor({L, m});
  out.known.resize(static_cast<size_t>(L));
  out.unknown.resize(static_cast<size_t>(L));
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    int l = 0, j = 0;
    char kind = 0;
    float score = 0.0f;
    if (std::sscanf(line.c_str(), "layer %d kind %c latent %d score %f", &l, &kind, &j, &score) != 4)
      throw ParseError("bad latent record '" + line + "'", line_no);
    if (l < 1 || l > L || j < 0 || j >= m) throw ParseError("latent indices out of range", line_no);
    out.scores.at(l - 1, j) = score;
    if (kind == 'k') out.known[static_cast<size_t>(l - 1)].push_back(j);
    else if (kind == 'u') out.unknown[static_cast<size_t>(l - 1)].push_back(j);
    else throw ParseError("unknown latent kind", line_no);
  }
  return out;
}

std::string serialize_scores(const Tensor& scores) {
  if (scores.rank() != 2) throw ContractViolation("serialize_scores: scores must be L x m");
  std::ostringstream os;
  os << "# scores v1 layers=" << scores.rows() << " latents=" << scores.cols() << "\n";
  os << "layer,latent,score\n";
  for (int l = 0; l < scores.rows(); ++l)
    for (int j = 0; j < scores.cols(); ++j)
      os << (l + 1) << ',' << j << ',' << fmt_float(scores.at(l, j)) << "\n";
  return os.str();
}

Tensor parse_scores(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty scores file");
  int L = 0, m = 0;
  if (std::sscanf(line.c_str(), "# scores v1 layers=%d latents=%d", &L, &m) != 2)
    throw ParseError("bad scores header '" + line + "'", 1);
  if (!std::getline(is, line) || line != "layer,latent,score")
    throw ParseError("bad scores column line", 2);
  Tensor out({L, m});
  int line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    int l = 0, j = 0;
    float s = 0.0f;
    if (std::sscanf(line.c_str(), "%d,%d,%f", &l, &j, &s) != 3)
      throw ParseError("bad scores record", line_no);
    if (l < 1 || l > L || j < 0 || j >= m) throw ParseError("scores indices out of range", line_no);
    out.at(l - 1, j) = s;
  }
  return out;
}

}  // namespace latentforge
