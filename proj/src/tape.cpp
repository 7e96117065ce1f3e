#include "compdiff/tape.hpp"

#include <cmath>
#include <string>

#include "compdiff/errors.hpp"
#include "compdiff/parallel.hpp"

namespace compdiff::ad {
namespace {

[[noreturn]] void shape_fail(const char* op, int r1, int c1, int r2, int c2) {
  throw ConfigError(std::string("tape: ") + op + " shape mismatch (" +
                    std::to_string(r1) + "x" + std::to_string(c1) + " vs " +
                    std::to_string(r2) + "x" + std::to_string(c2) + ")");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// silu(z) = z*s; silu'(z) = s*(1 + z*(1-s)); silu''(z) = s*(1-s)*(2 + z*(1-2s))
// with s = sigmoid(z).
double silu_f(double z) { return z * sigmoid(z); }
double dsilu_f(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}
double d2silu_f(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
}

}  // namespace

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.rg = requires_grad;
  n.val = std::move(value);
  return push(std::move(n));
}

NodeId Tape::unary(Op op, NodeId a, Tensor val, double alpha) {
  Node n;
  n.op = op;
  n.a = a;
  n.alpha = alpha;
  n.rg = nodes_[a].rg;
  n.val = std::move(val);
  return push(std::move(n));
}

NodeId Tape::binary(Op op, NodeId a, NodeId b, Tensor val) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.rg = nodes_[a].rg || nodes_[b].rg;
  n.val = std::move(val);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, bool ta, NodeId b, bool tb) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  const int m = ta ? A.cols : A.rows;
  const int k = ta ? A.rows : A.cols;
  const int kb = tb ? B.cols : B.rows;
  const int n = tb ? B.rows : B.cols;
  if (k != kb) shape_fail("matmul", A.rows, A.cols, B.rows, B.cols);

  Tensor out(m, n);
  const double* pa = A.v.data();
  const double* pb = B.v.data();
  double* pc = out.v.data();
  const int lda = A.cols, ldb = B.cols;

  // Every output element accumulates over k in ascending order, and workers
  // own whole output rows, so the result is worker-count independent.
  if (!ta && !tb) {
    parallel_for(m, [&](int i) {
      double* c = pc + std::size_t(i) * n;
      const double* ar = pa + std::size_t(i) * lda;
      for (int kk = 0; kk < k; ++kk) {
        const double av = ar[kk];
        const double* br = pb + std::size_t(kk) * ldb;
        for (int j = 0; j < n; ++j) c[j] += av * br[j];
      }
    });
  } else if (!ta && tb) {
    parallel_for(m, [&](int i) {
      double* c = pc + std::size_t(i) * n;
      const double* ar = pa + std::size_t(i) * lda;
      for (int j = 0; j < n; ++j) {
        const double* br = pb + std::size_t(j) * ldb;
        // Four fixed accumulator lanes: deterministic order, and the
        // pattern vectorizes without licensing FP reassociation.
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        int kk = 0;
        for (; kk + 4 <= k; kk += 4) {
          a0 += ar[kk] * br[kk];
          a1 += ar[kk + 1] * br[kk + 1];
          a2 += ar[kk + 2] * br[kk + 2];
          a3 += ar[kk + 3] * br[kk + 3];
        }
        double acc = (a0 + a1) + (a2 + a3);
        for (; kk < k; ++kk) acc += ar[kk] * br[kk];
        c[j] = acc;
      }
    });
  } else if (ta && !tb) {
    parallel_for(m, [&](int i) {
      double* c = pc + std::size_t(i) * n;
      for (int kk = 0; kk < k; ++kk) {
        const double av = pa[std::size_t(kk) * lda + i];
        const double* br = pb + std::size_t(kk) * ldb;
        for (int j = 0; j < n; ++j) c[j] += av * br[j];
      }
    });
  } else {
    parallel_for(m, [&](int i) {
      double* c = pc + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int kk = 0; kk < k; ++kk)
          acc += pa[std::size_t(kk) * lda + i] * pb[std::size_t(j) * ldb + kk];
        c[j] = acc;
      }
    });
  }

  Node node;
  node.op = Op::MatMul;
  node.ta = ta;
  node.tb = tb;
  node.a = a;
  node.b = b;
  node.rg = nodes_[a].rg || nodes_[b].rg;
  node.val = std::move(out);
  return push(std::move(node));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.rows != B.rows || A.cols != B.cols)
    shape_fail("add", A.rows, A.cols, B.rows, B.cols);
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = A.v[i] + B.v[i];
  return binary(Op::Add, a, b, std::move(out));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.rows != B.rows || A.cols != B.cols)
    shape_fail("sub", A.rows, A.cols, B.rows, B.cols);
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = A.v[i] - B.v[i];
  return binary(Op::Sub, a, b, std::move(out));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.rows != B.rows || A.cols != B.cols)
    shape_fail("mul", A.rows, A.cols, B.rows, B.cols);
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = A.v[i] * B.v[i];
  return binary(Op::Mul, a, b, std::move(out));
}

NodeId Tape::scale(NodeId a, double c) {
  const Tensor& A = nodes_[a].val;
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = c * A.v[i];
  return unary(Op::Scale, a, std::move(out), c);
}

NodeId Tape::add_rowvec(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (B.rows != 1 || B.cols != A.cols)
    shape_fail("add_rowvec", A.rows, A.cols, B.rows, B.cols);
  Tensor out(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j) + B.v[j];
  return binary(Op::AddRowVec, a, b, std::move(out));
}

NodeId Tape::colsum(NodeId a) {
  const Tensor& A = nodes_[a].val;
  Tensor out(1, A.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out.v[j] += A.at(i, j);
  return unary(Op::ColSum, a, std::move(out));
}

NodeId Tape::rowsum(NodeId a) {
  const Tensor& A = nodes_[a].val;
  Tensor out(A.rows, 1);
  for (int i = 0; i < A.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < A.cols; ++j) acc += A.at(i, j);
    out.v[i] = acc;
  }
  return unary(Op::RowSum, a, std::move(out));
}

NodeId Tape::bcast_col(NodeId a, int cols) {
  const Tensor& A = nodes_[a].val;
  if (A.cols != 1) shape_fail("bcast_col", A.rows, A.cols, A.rows, cols);
  Tensor out(A.rows, cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < cols; ++j) out.at(i, j) = A.v[i];
  return unary(Op::BcastCol, a, std::move(out));
}

NodeId Tape::bcast_rows(NodeId a, int rows) {
  const Tensor& A = nodes_[a].val;
  if (A.rows != 1) shape_fail("bcast_rows", A.rows, A.cols, rows, A.cols);
  Tensor out(rows, A.cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.v[j];
  return unary(Op::BcastRows, a, std::move(out));
}

NodeId Tape::bcast_all(NodeId a, int rows, int cols) {
  const Tensor& A = nodes_[a].val;
  if (A.rows != 1 || A.cols != 1) shape_fail("bcast_all", A.rows, A.cols, rows, cols);
  Tensor out(rows, cols);
  for (double& x : out.v) x = A.v[0];
  return unary(Op::BcastAll, a, std::move(out));
}

NodeId Tape::sum_all(NodeId a) {
  const Tensor& A = nodes_[a].val;
  Tensor out(1, 1);
  double acc = 0.0;
  for (double x : A.v) acc += x;
  out.v[0] = acc;
  return unary(Op::SumAll, a, std::move(out));
}

NodeId Tape::silu(NodeId a) {
  const Tensor& A = nodes_[a].val;
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = silu_f(A.v[i]);
  return unary(Op::Silu, a, std::move(out));
}

NodeId Tape::dsilu(NodeId a) {
  const Tensor& A = nodes_[a].val;
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = dsilu_f(A.v[i]);
  return unary(Op::DSilu, a, std::move(out));
}

NodeId Tape::d2silu(NodeId a) {
  const Tensor& A = nodes_[a].val;
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = d2silu_f(A.v[i]);
  return unary(Op::D2Silu, a, std::move(out));
}

void Tape::accumulate(std::vector<NodeId>& adj, NodeId target, NodeId grad) {
  if (!nodes_[target].rg) return;
  if (adj[target] < 0)
    adj[target] = grad;
  else
    adj[target] = add(adj[target], grad);
}

void Tape::backward_into(NodeId id, NodeId g, std::vector<NodeId>& adj,
                         const std::vector<char>& toward) {
  // Copy the header fields; emitting ops below may reallocate nodes_.
  const Op op = nodes_[id].op;
  const NodeId a = nodes_[id].a, b = nodes_[id].b;
  const bool ta = nodes_[id].ta, tb = nodes_[id].tb;
  const double alpha = nodes_[id].alpha;
  // Emit an input adjoint only if some requested node is reachable through
  // that input; this is what keeps e.g. parameter-gradient matmuls out of a
  // pure input-gradient pass.
  const bool wa = a >= 0 && nodes_[a].rg && toward[a];
  const bool wb = b >= 0 && nodes_[b].rg && toward[b];

  switch (op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      // out = op(A)*op(B); adjoints follow from dA' = g*B'^T, dB' = A'^T*g.
      if (wa) {
        NodeId da = ta ? matmul(b, tb, g, true) : matmul(g, false, b, !tb);
        accumulate(adj, a, da);
      }
      if (wb) {
        NodeId db = tb ? matmul(g, true, a, ta) : matmul(a, !ta, g, false);
        accumulate(adj, b, db);
      }
      break;
    }
    case Op::Add:
      if (wa) accumulate(adj, a, g);
      if (wb) accumulate(adj, b, g);
      break;
    case Op::Sub:
      if (wa) accumulate(adj, a, g);
      if (wb) accumulate(adj, b, scale(g, -1.0));
      break;
    case Op::Mul:
      if (wa) accumulate(adj, a, mul(g, b));
      if (wb) accumulate(adj, b, mul(g, a));
      break;
    case Op::Scale:
      if (wa) accumulate(adj, a, scale(g, alpha));
      break;
    case Op::AddRowVec:
      if (wa) accumulate(adj, a, g);
      if (wb) accumulate(adj, b, colsum(g));
      break;
    case Op::ColSum:
      if (wa) accumulate(adj, a, bcast_rows(g, nodes_[a].val.rows));
      break;
    case Op::RowSum:
      if (wa) accumulate(adj, a, bcast_col(g, nodes_[a].val.cols));
      break;
    case Op::BcastCol:
      if (wa) accumulate(adj, a, rowsum(g));
      break;
    case Op::BcastRows:
      if (wa) accumulate(adj, a, colsum(g));
      break;
    case Op::BcastAll:
      if (wa) accumulate(adj, a, sum_all(g));
      break;
    case Op::SumAll:
      if (wa)
        accumulate(adj, a, bcast_all(g, nodes_[a].val.rows, nodes_[a].val.cols));
      break;
    case Op::Silu:
      if (wa) accumulate(adj, a, mul(g, dsilu(a)));
      break;
    case Op::DSilu:
      if (wa) accumulate(adj, a, mul(g, d2silu(a)));
      break;
    case Op::D2Silu:
      if (wa)
        throw CapabilityError(
            "tape: third-order derivative of the activation is not supported");
      break;
  }
}

std::vector<NodeId> Tape::gradients(NodeId output, NodeId seed,
                                    const std::vector<NodeId>& wrt) {
  if (output < 0 || static_cast<std::size_t>(output) >= nodes_.size())
    throw ConfigError("tape: gradients() of an invalid node");
  if (seed < 0) {
    const Tensor& o = nodes_[output].val;
    seed = leaf(Tensor::ones(o.rows, o.cols), false);
  } else {
    const Tensor& o = nodes_[output].val;
    const Tensor& s = nodes_[seed].val;
    if (s.rows != o.rows || s.cols != o.cols)
      shape_fail("gradients seed", s.rows, s.cols, o.rows, o.cols);
  }

  // toward[n]: some wrt node is among n's transitive inputs.
  std::vector<char> toward(nodes_.size(), 0);
  for (NodeId w : wrt)
    if (w >= 0 && static_cast<std::size_t>(w) < toward.size()) toward[w] = 1;
  for (NodeId id = 0; id <= output; ++id) {
    const Node& n = nodes_[id];
    if (!toward[id] && ((n.a >= 0 && toward[n.a]) || (n.b >= 0 && toward[n.b])))
      toward[id] = 1;
  }

  // Tape order is a topological order (ops only reference earlier nodes), so
  // a single descending sweep visits consumers before producers. Nodes
  // emitted during the sweep land above `output` and are never revisited.
  std::vector<NodeId> adj(nodes_.size(), -1);
  adj[output] = seed;
  for (NodeId id = output; id >= 0; --id) {
    const NodeId g = adj[id];
    if (g < 0 || !nodes_[id].rg || !toward[id]) continue;
    backward_into(id, g, adj, toward);
    adj.resize(nodes_.size(), -1);  // keep slots for nodes emitted meanwhile
  }

  std::vector<NodeId> out(wrt.size(), -1);
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const NodeId w = wrt[i];
    if (w >= 0 && static_cast<std::size_t>(w) < adj.size()) out[i] = adj[w];
  }
  return out;
}

}  // namespace compdiff::ad
