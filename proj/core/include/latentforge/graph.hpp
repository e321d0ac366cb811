#pragma once

#include <functional>
#include <string>
#include <vector>

#include "latentforge/tensor.hpp"

namespace latentforge {

using NodeId = int;

// Gradients keyed by node id. Only nodes on a path from a requires-grad
// leaf to the loss get an entry.
class GradientMap {
 public:
  bool contains(NodeId id) const {
    return id >= 0 && id < static_cast<NodeId>(grads_.size()) && grads_[id].defined();
  }
  const Tensor& at(NodeId id) const;
  Tensor& slot(NodeId id);
  void resize(size_t n) { grads_.resize(n); }

 private:
  std::vector<Tensor> grads_;
};

// Reverse-mode tape. Values are computed eagerly as nodes are appended, so
// node ids are already a topological order; backward() walks them once in
// reverse. Every op checks its output for NaN/Inf and throws NumericFailure
// naming the offending node, which keeps divergence diagnosable.
class Graph {
 public:
  NodeId leaf(Tensor value, bool requires_grad = false, std::string name = {});

  NodeId add(NodeId a, NodeId b);        // elementwise, same shape
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, float c);
  NodeId add_const(NodeId a, float c);
  NodeId matmul(NodeId a, NodeId b);     // [n,k] x [k,m]
  NodeId matmul_nt(NodeId a, NodeId b);  // [n,k] x [m,k]^T -> [n,m]
  NodeId add_row(NodeId mat, NodeId row);  // broadcast row vector over rows
  NodeId relu(NodeId a);                 // max(x,0); derivative at the kink is 0
  NodeId softplus(NodeId a);             // log(1+e^x), overflow-safe
  NodeId gather_rows(NodeId a, std::vector<int> rows);  // duplicates accumulate in backward
  NodeId gather_cols(NodeId a, std::vector<int> cols);
  NodeId causal_softmax(NodeId scores);  // square [n,n]; row r normalizes over cols 0..r
  NodeId sum(NodeId a);                  // scalar
  NodeId mean(NodeId a);                 // scalar

  // Sum over rows of -log softmax(logits[r])[target[r]]. Accumulated in f64
  // (read back with scalar_value) so long sequences do not lose precision.
  NodeId softmax_xent_sum(NodeId logits, std::vector<int> targets);
  // Per-row log softmax(logits[r])[target[r]] as a vector.
  NodeId token_logprob(NodeId logits, std::vector<int> targets);

  // Gated identity: out[i,j] = z[i,j] if z[i,j] > theta[j] else 0, strict.
  // Backward passes the gate mask to z and a rectangle-kernel
  // pseudo-derivative of width `bandwidth` to theta.
  NodeId jump_relu(NodeId z, NodeId theta, float bandwidth);
  // Mean per-row count of z[i,j] > theta[j]. Gradient flows to theta only,
  // through the same rectangle kernel; z gets none.
  NodeId jump_count_mean(NodeId z, NodeId theta, float bandwidth);

  const Tensor& value(NodeId id) const;
  double scalar_value(NodeId id) const;  // f64 accumulation when the op kept one
  int node_count() const { return static_cast<int>(nodes_.size()); }

  GradientMap backward(NodeId loss);

 private:
  struct Node {
    // op discriminator, see graph.cpp
    int op;
    NodeId a = -1, b = -1;
    Tensor value;
    Tensor aux;              // op-specific (softmax probs, gate masks, ...)
    std::vector<int> index;  // gather ids / xent targets
    float c0 = 0.0f;
    double f64 = 0.0;        // side-channel scalar in double
    bool has_f64 = false;
    bool requires_grad = false;
    std::string name;
  };

  NodeId push(Node n, const char* what);
  const Node& node(NodeId id) const;

  std::vector<Node> nodes_;
};

GradientMap forward_backward(Graph& g, NodeId loss);

// Builds the scalar function f on a fresh graph around `point` (passed in as
// a requires-grad leaf), then compares the reverse-mode gradient against
// central differences coordinate by coordinate. Returns the worst relative
// error |g_ad - g_fd| / (|g_fd| + 1e-8). Coordinates whose perturbed values
// land within `kink_guard` of a hinge argument are the caller's problem;
// choose test points away from kinks.
double finite_diff_check(
    const std::function<NodeId(Graph&, NodeId)>& f,
    const Tensor& point, float step);

}  // namespace latentforge
