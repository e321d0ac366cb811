#include "latentforge/graph.hpp"

#include <Eigen/Core>
#include <cmath>
#include <utility>

#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

enum OpKind : int {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddConst,
  kMatmul,
  kMatmulNT,
  kAddRow,
  kRelu,
  kSoftplus,
  kGatherRows,
  kGatherCols,
  kCausalSoftmax,
  kSum,
  kMean,
  kSoftmaxXentSum,
  kTokenLogProb,
  kJumpRelu,
  kJumpCountMean,
};

const char* op_name(int op) {
  switch (op) {
    case kLeaf: return "leaf";
    case kAdd: return "add";
    case kSub: return "sub";
    case kMul: return "mul";
    case kScale: return "scale";
    case kAddConst: return "add_const";
    case kMatmul: return "matmul";
    case kMatmulNT: return "matmul_nt";
    case kAddRow: return "add_row";
    case kRelu: return "relu";
    case kSoftplus: return "softplus";
    case kGatherRows: return "gather_rows";
    case kGatherCols: return "gather_cols";
    case kCausalSoftmax: return "causal_softmax";
    case kSum: return "sum";
    case kMean: return "mean";
    case kSoftmaxXentSum: return "softmax_xent_sum";
    case kTokenLogProb: return "token_logprob";
    case kJumpRelu: return "jump_relu";
    case kJumpCountMean: return "jump_count_mean";
    default: return "?";
  }
}

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat as_mat(const Tensor& t) {
  return CMapMat(t.data(), t.rows(), t.cols());
}
MapMat as_mat(Tensor& t) {
  return MapMat(t.data(), t.rows(), t.cols());
}

using ArrMap = Eigen::Map<Eigen::ArrayXf>;
using CArrMap = Eigen::Map<const Eigen::ArrayXf>;

CArrMap as_arr(const Tensor& t) {
  return CArrMap(t.data(), static_cast<Eigen::Index>(t.size()));
}
ArrMap as_arr(Tensor& t) {
  return ArrMap(t.data(), static_cast<Eigen::Index>(t.size()));
}

float stable_softplus(float x) {
  // log(1+e^x) without overflow on large |x|
  if (x > 0.0f) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

const Tensor& GradientMap::at(NodeId id) const {
  if (!contains(id)) throw LookupError("gradient map has no entry for node " + std::to_string(id));
  return grads_[static_cast<size_t>(id)];
}

Tensor& GradientMap::slot(NodeId id) { return grads_[static_cast<size_t>(id)]; }

const Graph::Node& Graph::node(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw ContractViolation("bad node id " + std::to_string(id));
  return nodes_[static_cast<size_t>(id)];
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }

double Graph::scalar_value(NodeId id) const {
  const Node& n = node(id);
  if (n.has_f64) return n.f64;
  return static_cast<double>(n.value.item());
}

NodeId Graph::push(Node n, const char* what) {
  if (!n.value.all_finite())
    throw NumericFailure(std::string("non-finite value in node #") +
                         std::to_string(nodes_.size()) + " (" + what + ")" +
                         (n.name.empty() ? "" : " [" + n.name + "]"));
  if (n.has_f64 && !std::isfinite(n.f64))
    throw NumericFailure(std::string("non-finite scalar in node #") +
                         std::to_string(nodes_.size()) + " (" + what + ")");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::leaf(Tensor value, bool requires_grad, std::string name) {
  Node n;
  n.op = kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  return push(std::move(n), "leaf");
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (!na.value.same_shape(nb.value))
    throw ContractViolation("add: shape mismatch " + na.value.shape_str() + " vs " + nb.value.shape_str());
  Node n;
  n.op = kAdd;
  n.a = a;
  n.b = b;
  n.value = Tensor::uninit(na.value.shape());
  as_arr(n.value) = as_arr(na.value) + as_arr(nb.value);
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n), "add");
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (!na.value.same_shape(nb.value))
    throw ContractViolation("sub: shape mismatch " + na.value.shape_str() + " vs " + nb.value.shape_str());
  Node n;
  n.op = kSub;
  n.a = a;
  n.b = b;
  n.value = Tensor::uninit(na.value.shape());
  as_arr(n.value) = as_arr(na.value) - as_arr(nb.value);
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n), "sub");
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (!na.value.same_shape(nb.value))
    throw ContractViolation("mul: shape mismatch " + na.value.shape_str() + " vs " + nb.value.shape_str());
  Node n;
  n.op = kMul;
  n.a = a;
  n.b = b;
  n.value = Tensor::uninit(na.value.shape());
  as_arr(n.value) = as_arr(na.value) * as_arr(nb.value);
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n), "mul");
}

NodeId Graph::scale(NodeId a, float c) {
  const Node& na = node(a);
  Node n;
  n.op = kScale;
  n.a = a;
  n.c0 = c;
  n.value = Tensor::uninit(na.value.shape());
  as_arr(n.value) = as_arr(na.value) * c;
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "scale");
}

NodeId Graph::add_const(NodeId a, float c) {
  const Node& na = node(a);
  Node n;
  n.op = kAddConst;
  n.a = a;
  n.c0 = c;
  n.value = Tensor::uninit(na.value.shape());
  as_arr(n.value) = as_arr(na.value) + c;
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "add_const");
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (na.value.rank() != 2 || nb.value.rank() != 2 || na.value.cols() != nb.value.rows())
    throw ContractViolation("matmul: incompatible shapes " + na.value.shape_str() + " x " + nb.value.shape_str());
  Node n;
  n.op = kMatmul;
  n.a = a;
  n.b = b;
  n.value = Tensor::uninit({na.value.rows(), nb.value.cols()});
  as_mat(n.value).noalias() = as_mat(na.value) * as_mat(nb.value);
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n), "matmul");
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (na.value.rank() != 2 || nb.value.rank() != 2 || na.value.cols() != nb.value.cols())
    throw ContractViolation("matmul_nt: incompatible shapes " + na.value.shape_str() + " x " + nb.value.shape_str() + "^T");
  Node n;
  n.op = kMatmulNT;
  n.a = a;
  n.b = b;
  n.value = Tensor::uninit({na.value.rows(), nb.value.rows()});
  as_mat(n.value).noalias() = as_mat(na.value) * as_mat(nb.value).transpose();
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n), "matmul_nt");
}

NodeId Graph::add_row(NodeId mat, NodeId row) {
  const Node &nm = node(mat), &nr = node(row);
  if (nm.value.rank() != 2 || nr.value.rank() != 1 || nm.value.cols() != nr.value.dim(0))
    throw ContractViolation("add_row: shapes " + nm.value.shape_str() + " + " + nr.value.shape_str());
  Node n;
  n.op = kAddRow;
  n.a = mat;
  n.b = row;
  n.value = Tensor::uninit(nm.value.shape());
  Eigen::Map<const Eigen::RowVectorXf> rv(nr.value.data(), nr.value.dim(0));
  as_mat(n.value) = as_mat(nm.value).rowwise() + rv;
  n.requires_grad = nm.requires_grad || nr.requires_grad;
  return push(std::move(n), "add_row");
}

NodeId Graph::relu(NodeId a) {
  const Node& na = node(a);
  Node n;
  n.op = kRelu;
  n.a = a;
  n.value = Tensor::uninit(na.value.shape());
  as_arr(n.value) = as_arr(na.value).max(0.0f);
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "relu");
}

NodeId Graph::softplus(NodeId a) {
  const Node& na = node(a);
  Node n;
  n.op = kSoftplus;
  n.a = a;
  n.value = Tensor::uninit(na.value.shape());
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] = stable_softplus(na.value[i]);
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "softplus");
}

NodeId Graph::gather_rows(NodeId a, std::vector<int> rows) {
  const Node& na = node(a);
  if (na.value.rank() != 2) throw ContractViolation("gather_rows: source must be rank 2");
  int nr = na.value.rows(), nc = na.value.cols();
  for (int r : rows)
    if (r < 0 || r >= nr) throw ContractViolation("gather_rows: row " + std::to_string(r) + " out of range");
  Node n;
  n.op = kGatherRows;
  n.a = a;
  n.value = Tensor::uninit({static_cast<int>(rows.size()), nc});
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy_n(na.value.data() + static_cast<int64_t>(rows[i]) * nc, nc,
                n.value.data() + static_cast<int64_t>(i) * nc);
  n.index = std::move(rows);
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "gather_rows");
}

NodeId Graph::gather_cols(NodeId a, std::vector<int> cols) {
  const Node& na = node(a);
  if (na.value.rank() != 2) throw ContractViolation("gather_cols: source must be rank 2");
  int nr = na.value.rows(), nc = na.value.cols();
  for (int c : cols)
    if (c < 0 || c >= nc) throw ContractViolation("gather_cols: col " + std::to_string(c) + " out of range");
  Node n;
  n.op = kGatherCols;
  n.a = a;
  n.value = Tensor::uninit({nr, static_cast<int>(cols.size())});
  for (int r = 0; r < nr; ++r)
    for (size_t i = 0; i < cols.size(); ++i)
      n.value[static_cast<int64_t>(r) * cols.size() + i] = na.value[static_cast<int64_t>(r) * nc + cols[i]];
  n.index = std::move(cols);
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "gather_cols");
}

NodeId Graph::causal_softmax(NodeId scores) {
  const Node& na = node(scores);
  if (na.value.rank() != 2 || na.value.rows() != na.value.cols())
    throw ContractViolation("causal_softmax: scores must be square, got " + na.value.shape_str());
  int nr = na.value.rows();
  Node n;
  n.op = kCausalSoftmax;
  n.a = scores;
  n.value = Tensor({nr, nr});  // zero-filled: the upper triangle stays 0
  for (int r = 0; r < nr; ++r) {
    CArrMap row(na.value.data() + static_cast<int64_t>(r) * nr, r + 1);
    ArrMap out(n.value.data() + static_cast<int64_t>(r) * nr, r + 1);
    float mx = row.maxCoeff();
    out = (row - mx).exp();
    double denom = out.cast<double>().sum();
    out = (out.cast<double>() / denom).cast<float>();
  }
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "causal_softmax");
}

NodeId Graph::sum(NodeId a) {
  const Node& na = node(a);
  double s = as_arr(na.value).cast<double>().sum();
  Node n;
  n.op = kSum;
  n.a = a;
  n.value = Tensor::scalar(static_cast<float>(s));
  n.f64 = s;
  n.has_f64 = true;
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "sum");
}

NodeId Graph::mean(NodeId a) {
  const Node& na = node(a);
  if (na.value.size() == 0) throw ContractViolation("mean of empty tensor");
  double s = as_arr(na.value).cast<double>().sum() / static_cast<double>(na.value.size());
  Node n;
  n.op = kMean;
  n.a = a;
  n.value = Tensor::scalar(static_cast<float>(s));
  n.f64 = s;
  n.has_f64 = true;
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "mean");
}

NodeId Graph::softmax_xent_sum(NodeId logits, std::vector<int> targets) {
  const Node& na = node(logits);
  if (na.value.rank() != 2 || na.value.rows() != static_cast<int>(targets.size()))
    throw ContractViolation("softmax_xent_sum: need one target per logit row");
  int nr = na.value.rows(), nc = na.value.cols();
  for (int t : targets)
    if (t < 0 || t >= nc) throw ContractViolation("softmax_xent_sum: target out of range");
  Node n;
  n.op = kSoftmaxXentSum;
  n.a = logits;
  n.aux = Tensor::uninit({nr, nc});  // softmax probs for backward
  double total = 0.0;
  for (int r = 0; r < nr; ++r) {
    CArrMap row(na.value.data() + static_cast<int64_t>(r) * nc, nc);
    ArrMap prow(n.aux.data() + static_cast<int64_t>(r) * nc, nc);
    float mx = row.maxCoeff();
    prow = (row - mx).exp();
    double denom = prow.cast<double>().sum();
    prow = (prow.cast<double>() / denom).cast<float>();
    total += -(static_cast<double>(row[targets[static_cast<size_t>(r)]]) - mx - std::log(denom));
  }
  n.value = Tensor::scalar(static_cast<float>(total));
  n.f64 = total;
  n.has_f64 = true;
  n.index = std::move(targets);
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "softmax_xent_sum");
}

NodeId Graph::token_logprob(NodeId logits, std::vector<int> targets) {
  const Node& na = node(logits);
  if (na.value.rank() != 2 || na.value.rows() != static_cast<int>(targets.size()))
    throw ContractViolation("token_logprob: need one target per logit row");
  int nr = na.value.rows(), nc = na.value.cols();
  for (int t : targets)
    if (t < 0 || t >= nc) throw ContractViolation("token_logprob: target out of range");
  Node n;
  n.op = kTokenLogProb;
  n.a = logits;
  n.aux = Tensor::uninit({nr, nc});
  n.value = Tensor::uninit({nr});
  for (int r = 0; r < nr; ++r) {
    CArrMap row(na.value.data() + static_cast<int64_t>(r) * nc, nc);
    ArrMap prow(n.aux.data() + static_cast<int64_t>(r) * nc, nc);
    float mx = row.maxCoeff();
    prow = (row - mx).exp();
    double denom = prow.cast<double>().sum();
    prow = (prow.cast<double>() / denom).cast<float>();
    n.value[r] = static_cast<float>(static_cast<double>(row[targets[static_cast<size_t>(r)]]) - mx - std::log(denom));
  }
  n.index = std::move(targets);
  n.requires_grad = na.requires_grad;
  return push(std::move(n), "token_logprob");
}

NodeId Graph::jump_relu(NodeId z, NodeId theta, float bandwidth) {
  const Node &nz = node(z), &nt = node(theta);
  if (nz.value.rank() != 2 || nt.value.rank() != 1 || nz.value.cols() != nt.value.dim(0))
    throw ContractViolation("jump_relu: shapes " + nz.value.shape_str() + " with theta " + nt.value.shape_str());
  if (bandwidth <= 0.0f) throw ContractViolation("jump_relu: bandwidth must be positive");
  Node n;
  n.op = kJumpRelu;
  n.a = z;
  n.b = theta;
  n.c0 = bandwidth;
  int nr = nz.value.rows(), nc = nz.value.cols();
  n.value = Tensor::uninit({nr, nc});
  CArrMap th(nt.value.data(), nc);
  for (int r = 0; r < nr; ++r) {
    CArrMap zr(nz.value.data() + static_cast<int64_t>(r) * nc, nc);
    ArrMap(n.value.data() + static_cast<int64_t>(r) * nc, nc) = (zr > th).select(zr, 0.0f);
  }
  n.requires_grad = nz.requires_grad || nt.requires_grad;
  return push(std::move(n), "jump_relu");
}

NodeId Graph::jump_count_mean(NodeId z, NodeId theta, float bandwidth) {
  const Node &nz = node(z), &nt = node(theta);
  if (nz.value.rank() != 2 || nt.value.rank() != 1 || nz.value.cols() != nt.value.dim(0))
    throw ContractViolation("jump_count_mean: shapes " + nz.value.shape_str() + " with theta " + nt.value.shape_str());
  if (bandwidth <= 0.0f) throw ContractViolation("jump_count_mean: bandwidth must be positive");
  int nr = nz.value.rows(), nc = nz.value.cols();
  if (nr == 0) throw ContractViolation("jump_count_mean: empty batch");
  double count = 0.0;
  CArrMap th(nt.value.data(), nc);
  for (int r = 0; r < nr; ++r) {
    CArrMap zr(nz.value.data() + static_cast<int64_t>(r) * nc, nc);
    count += static_cast<double>((zr > th).count());
  }
  count /= static_cast<double>(nr);
  Node n;
  n.op = kJumpCountMean;
  n.a = z;
  n.b = theta;
  n.c0 = bandwidth;
  n.value = Tensor::scalar(static_cast<float>(count));
  n.f64 = count;
  n.has_f64 = true;
  n.requires_grad = nz.requires_grad || nt.requires_grad;
  return push(std::move(n), "jump_count_mean");
}

GradientMap Graph::backward(NodeId loss) {
  const Node& ln = node(loss);
  if (ln.value.size() != 1)
    throw ContractViolation("backward: loss must be scalar, got shape " + ln.value.shape_str());
  GradientMap gm;
  gm.resize(nodes_.size());
  gm.slot(loss) = Tensor::full(ln.value.shape(), 1.0f);

  auto ensure = [&](NodeId id) -> Tensor& {
    Tensor& slot = gm.slot(id);
    if (!slot.defined()) slot = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape());
    return slot;
  };
  // First contribution assigns into uninitialized storage, later ones
  // accumulate; saves a zero-fill pass over every gradient slot.
  auto add_or_assign = [&](NodeId id, const auto& expr) {
    Tensor& slot = gm.slot(id);
    if (!slot.defined()) {
      slot = Tensor::uninit(nodes_[static_cast<size_t>(id)].value.shape());
      as_arr(slot) = expr;
    } else {
      as_arr(slot) += expr;
    }
  };
  auto add_or_assign_mat = [&](NodeId id, const auto& expr) {
    Tensor& slot = gm.slot(id);
    if (!slot.defined()) {
      slot = Tensor::uninit(nodes_[static_cast<size_t>(id)].value.shape());
      as_mat(slot).noalias() = expr;
    } else {
      as_mat(slot).noalias() += expr;
    }
  };
  auto wants = [&](NodeId id) { return id >= 0 && nodes_[static_cast<size_t>(id)].requires_grad; };

  for (NodeId id = loss; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (!gm.contains(id) || !n.requires_grad) continue;
    const Tensor& g = gm.at(id);
    switch (n.op) {
      case kLeaf:
        break;
      case kAdd: {
        if (wants(n.a)) add_or_assign(n.a, as_arr(g));
        if (wants(n.b)) add_or_assign(n.b, as_arr(g));
        break;
      }
      case kSub: {
        if (wants(n.a)) add_or_assign(n.a, as_arr(g));
        if (wants(n.b)) add_or_assign(n.b, -as_arr(g));
        break;
      }
      case kMul: {
        const Tensor &va = nodes_[static_cast<size_t>(n.a)].value, &vb = nodes_[static_cast<size_t>(n.b)].value;
        if (wants(n.a)) add_or_assign(n.a, as_arr(g) * as_arr(vb));
        if (wants(n.b)) add_or_assign(n.b, as_arr(g) * as_arr(va));
        break;
      }
      case kScale: {
        if (wants(n.a)) add_or_assign(n.a, as_arr(g) * n.c0);
        break;
      }
      case kAddConst: {
        if (wants(n.a)) add_or_assign(n.a, as_arr(g));
        break;
      }
      case kMatmul: {
        const Tensor &va = nodes_[static_cast<size_t>(n.a)].value, &vb = nodes_[static_cast<size_t>(n.b)].value;
        if (wants(n.a)) add_or_assign_mat(n.a, as_mat(g) * as_mat(vb).transpose());
        if (wants(n.b)) add_or_assign_mat(n.b, as_mat(va).transpose() * as_mat(g));
        break;
      }
      case kMatmulNT: {
        const Tensor &va = nodes_[static_cast<size_t>(n.a)].value, &vb = nodes_[static_cast<size_t>(n.b)].value;
        if (wants(n.a)) add_or_assign_mat(n.a, as_mat(g) * as_mat(vb));
        if (wants(n.b)) add_or_assign_mat(n.b, as_mat(g).transpose() * as_mat(va));
        break;
      }
      case kAddRow: {
        if (wants(n.a)) add_or_assign(n.a, as_arr(g));
        if (wants(n.b)) {
          Tensor& gb = ensure(n.b);
          Eigen::Map<Eigen::RowVectorXf> gbv(gb.data(), gb.dim(0));
          gbv += as_mat(g).colwise().sum();
        }
        break;
      }
      case kRelu: {
        if (wants(n.a)) {
          const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
          add_or_assign(n.a, (as_arr(va) > 0.0f).select(as_arr(g), 0.0f));
        }
        break;
      }
      case kSoftplus: {
        if (wants(n.a)) {
          const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
          add_or_assign(n.a, as_arr(g) / (1.0f + (-as_arr(va)).exp()));
        }
        break;
      }
      case kGatherRows: {
        if (wants(n.a)) {
          Tensor& ga = ensure(n.a);
          int nc = g.cols();
          for (size_t i = 0; i < n.index.size(); ++i)
            ArrMap(ga.data() + static_cast<int64_t>(n.index[i]) * nc, nc) +=
                CArrMap(g.data() + static_cast<int64_t>(i) * nc, nc);
        }
        break;
      }
      case kGatherCols: {
        if (wants(n.a)) {
          Tensor& ga = ensure(n.a);
          int nr = g.rows();
          int src_cols = nodes_[static_cast<size_t>(n.a)].value.cols();
          for (int r = 0; r < nr; ++r)
            for (size_t i = 0; i < n.index.size(); ++i)
              ga[static_cast<int64_t>(r) * src_cols + n.index[i]] += g[static_cast<int64_t>(r) * n.index.size() + i];
        }
        break;
      }
      case kCausalSoftmax: {
        if (wants(n.a)) {
          Tensor& ga = ensure(n.a);
          const Tensor& p = n.value;
          int nr = p.rows();
          for (int r = 0; r < nr; ++r) {
            int64_t off = static_cast<int64_t>(r) * nr;
            CArrMap gr(g.data() + off, r + 1), pr(p.data() + off, r + 1);
            double dot = (gr.cast<double>() * pr.cast<double>()).sum();
            ArrMap(ga.data() + off, r + 1) += pr * (gr - static_cast<float>(dot));
          }
        }
        break;
      }
      case kSum: {
        if (wants(n.a)) {
          Tensor& ga = gm.slot(n.a);
          if (!ga.defined()) {
            ga = Tensor::full(nodes_[static_cast<size_t>(n.a)].value.shape(), g[0]);
          } else {
            as_arr(ga) += g[0];
          }
        }
        break;
      }
      case kMean: {
        if (wants(n.a)) {
          const Tensor& va = nodes_[static_cast<size_t>(n.a)].value;
          float gs = g[0] / static_cast<float>(va.size());
          Tensor& ga = gm.slot(n.a);
          if (!ga.defined()) {
            ga = Tensor::full(va.shape(), gs);
          } else {
            as_arr(ga) += gs;
          }
        }
        break;
      }
      case kSoftmaxXentSum: {
        if (wants(n.a)) {
          float gs = g[0];
          add_or_assign(n.a, gs * as_arr(n.aux));
          Tensor& ga = gm.slot(n.a);
          int nc = n.aux.cols();
          for (size_t r = 0; r < n.index.size(); ++r)
            ga[static_cast<int64_t>(r) * nc + n.index[r]] -= gs;
        }
        break;
      }
      case kTokenLogProb: {
        if (wants(n.a)) {
          Tensor& ga = ensure(n.a);
          const Tensor& p = n.aux;
          int nr = p.rows(), nc = p.cols();
          for (int r = 0; r < nr; ++r) {
            float gr = g[r];
            int64_t off = static_cast<int64_t>(r) * nc;
            ArrMap(ga.data() + off, nc) -= gr * CArrMap(p.data() + off, nc);
            ga[off + n.index[static_cast<size_t>(r)]] += gr;
          }
        }
        break;
      }
      case kJumpRelu: {
        const Tensor &vz = nodes_[static_cast<size_t>(n.a)].value, &vt = nodes_[static_cast<size_t>(n.b)].value;
        int nr = vz.rows(), nc = vz.cols();
        float eps = n.c0;
        CArrMap th(vt.data(), nc);
        if (wants(n.a)) {
          Tensor& gz = ensure(n.a);
          for (int r = 0; r < nr; ++r) {
            int64_t off = static_cast<int64_t>(r) * nc;
            CArrMap zr(vz.data() + off, nc), gr(g.data() + off, nc);
            ArrMap(gz.data() + off, nc) += (zr > th).select(gr, 0.0f);
          }
        }
        if (wants(n.b)) {
          // rectangle-kernel pseudo-derivative: -theta/eps inside the window
          Tensor& gt = ensure(n.b);
          ArrMap gta(gt.data(), nc);
          for (int r = 0; r < nr; ++r) {
            int64_t off = static_cast<int64_t>(r) * nc;
            CArrMap zr(vz.data() + off, nc), gr(g.data() + off, nc);
            gta += ((zr - th).abs() < 0.5f * eps).select(gr * (-th / eps), 0.0f);
          }
        }
        break;
      }
      case kJumpCountMean: {
        if (wants(n.b)) {
          const Tensor &vz = nodes_[static_cast<size_t>(n.a)].value, &vt = nodes_[static_cast<size_t>(n.b)].value;
          Tensor& gt = ensure(n.b);
          int nr = vz.rows(), nc = vz.cols();
          float eps = n.c0;
          float gs = g[0] / static_cast<float>(nr);
          CArrMap th(vt.data(), nc);
          ArrMap gta(gt.data(), nc);
          for (int r = 0; r < nr; ++r) {
            CArrMap zr(vz.data() + static_cast<int64_t>(r) * nc, nc);
            gta += ((zr - th).abs() < 0.5f * eps).cast<float>() * (gs * (-1.0f / eps));
          }
        }
        break;
      }
      default:
        throw ContractViolation("backward: unknown op");
    }
  }
  return gm;
}

GradientMap forward_backward(Graph& g, NodeId loss) { return g.backward(loss); }

double finite_diff_check(
    const std::function<NodeId(Graph&, NodeId)>& f,
    const Tensor& point, float step) {
  if (step <= 0.0f) throw ContractViolation("finite_diff_check: step must be positive");
  Graph g;
  NodeId p = g.leaf(point, /*requires_grad=*/true, "probe-point");
  NodeId loss = f(g, p);
  if (g.value(loss).size() != 1)
    throw ContractViolation("finite_diff_check: f must return a scalar node");
  GradientMap gm = g.backward(loss);
  Tensor grad = gm.contains(p) ? gm.at(p) : Tensor::zeros(point.shape());

  auto eval_at = [&](const Tensor& x) {
    Graph h;
    NodeId px = h.leaf(x, /*requires_grad=*/false, "probe-point");
    NodeId lx = f(h, px);
    return h.scalar_value(lx);
  };

  double worst = 0.0;
  Tensor x = point;
  for (int64_t i = 0; i < point.size(); ++i) {
    float keep = x[i];
    x[i] = keep + step;
    double fp = eval_at(x);
    x[i] = keep - step;
    double fm = eval_at(x);
    x[i] = keep;
    double fd = (fp - fm) / (2.0 * static_cast<double>(step));
    double rel = std::fabs(static_cast<double>(grad[i]) - fd) / (std::fabs(fd) + 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace latentforge
