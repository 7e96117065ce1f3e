#pragma once

#include <cstdint>
#include <vector>

namespace compdiff::ad {

// Dense row-major matrix of doubles; the only value type on the tape.
struct Tensor {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, 0.0) {}
  static Tensor ones(int r, int c) {
    Tensor t(r, c);
    for (double& x : t.v) x = 1.0;
    return t;
  }
  double& at(int i, int j) { return v[std::size_t(i) * cols + j]; }
  double at(int i, int j) const { return v[std::size_t(i) * cols + j]; }
  std::size_t size() const { return v.size(); }
};

using NodeId = std::int32_t;

// Define-by-run reverse-mode differentiation tape.
//
// The one property everything else leans on: backward passes are expressed
// in the same primitive ops and appended to the same tape, so the output of
// gradients() is itself differentiable. Training energy parameterizations
// needs exactly two levels (the loss contains an input-gradient); the
// activation therefore carries analytic first and second derivative
// primitives, and a third-order request fails loudly rather than silently.
//
// Determinism: every op gives each output element a fixed serial reduction
// order (matmul accumulates k-ascending), and parallel execution only splits
// whole output rows across workers, so results are bit-identical for any
// worker count.
class Tape {
 public:
  NodeId leaf(Tensor value, bool requires_grad);

  // matmul(a, ta, b, tb) = op(a) * op(b) with op(x) = x^T when the flag is set.
  NodeId matmul(NodeId a, bool ta, NodeId b, bool tb);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, double c);
  NodeId add_rowvec(NodeId a, NodeId b);        // [BxN] + [1xN]
  NodeId colsum(NodeId a);                      // [BxN] -> [1xN]
  NodeId rowsum(NodeId a);                      // [BxN] -> [Bx1]
  NodeId bcast_col(NodeId a, int cols);         // [Bx1] -> [BxN]
  NodeId bcast_rows(NodeId a, int rows);        // [1xN] -> [BxN]
  NodeId bcast_all(NodeId a, int rows, int cols);  // [1x1] -> [BxN]
  NodeId sum_all(NodeId a);                     // [BxN] -> [1x1]
  NodeId silu(NodeId a);
  NodeId dsilu(NodeId a);
  NodeId d2silu(NodeId a);

  const Tensor& val(NodeId id) const { return nodes_[id].val; }
  bool requires_grad(NodeId id) const { return nodes_[id].rg; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from `output`, seeded with `seed` (or ones when seed < 0).
  // Returns adjoint node ids aligned with `wrt`; -1 where the output does not
  // depend on that node. The adjoints are ordinary tape nodes, so calling
  // gradients() on (functions of) them yields second-order gradients.
  std::vector<NodeId> gradients(NodeId output, NodeId seed,
                                const std::vector<NodeId>& wrt);

  void clear() { nodes_.clear(); }

 private:
  enum class Op : std::uint8_t {
    Leaf, MatMul, Add, Sub, Mul, Scale, AddRowVec, ColSum, RowSum,
    BcastCol, BcastRows, BcastAll, SumAll, Silu, DSilu, D2Silu,
  };
  struct Node {
    Op op = Op::Leaf;
    bool ta = false, tb = false;
    double alpha = 0.0;
    NodeId a = -1, b = -1;
    bool rg = false;
    Tensor val;
  };

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }
  NodeId unary(Op op, NodeId a, Tensor val, double alpha = 0.0);
  NodeId binary(Op op, NodeId a, NodeId b, Tensor val);
  void backward_into(NodeId id, NodeId g, std::vector<NodeId>& adj,
                     const std::vector<char>& toward);
  void accumulate(std::vector<NodeId>& adj, NodeId target, NodeId grad);

  std::vector<Node> nodes_;
};

}  // namespace compdiff::ad
