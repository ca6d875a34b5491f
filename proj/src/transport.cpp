#include "mmsb/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mmsb/error.hpp"

namespace mmsb {

namespace {

// Uncapacitated network simplex on the complete bipartite graph
// supply i -> demand j, plus one artificial arc per node to a root.
//
// Nonbasic arcs always sit at zero flow, so flow is stored only for the
// spanning-tree arc connecting each node to its parent. The tree keeps
// parent/depth and intrusive child lists; after a pivot the re-hung subtree
// is walked once to refresh depths and shift potentials.
//
// Potentials and depths are stored only for internal tree nodes. A leaf's
// values follow from its parent through the tree arc, so re-hanging a
// subtree only touches its internal nodes.
class BipartiteSimplex {
 public:
  BipartiteSimplex(const VectorXd& supply, const VectorXd& demand, const RowMatrix<double>& cost)
      : m1_(static_cast<Node>(supply.size())),
        m2_(static_cast<Node>(demand.size())),
        nodes_(m1_ + m2_),
        root_(nodes_),
        arcs_(static_cast<Arc>(m1_) * m2_),
        cost_(cost) {
    const std::size_t all = static_cast<std::size_t>(nodes_) + 1;
    parent_.assign(all, kNone);
    pred_.assign(all, kNone);
    up_.assign(all, 0);
    flow_.assign(all, 0.0);
    pi_.assign(all, 0.0);
    depth_.assign(all, 0);
    first_child_.assign(all, kNone);
    last_child_.assign(all, kNone);
    next_sib_.assign(all, kNone);
    prev_sib_.assign(all, kNone);

    const double max_cost = arcs_ > 0 ? cost_.maxCoeff() : 0.0;
    art_cost_ = (std::max(max_cost, 0.0) + 1.0) * static_cast<double>(nodes_ + 1);

    for (Node u = nodes_ - 1; u >= 0; --u) {
      parent_[u] = root_;
      pred_[u] = arcs_ + u;
      depth_[u] = 1;
      if (u < m1_) {
        up_[u] = 1;  // u -> root, cost 0
        flow_[u] = supply(u);
        pi_[u] = 0.0;
      } else {
        up_[u] = 0;  // root -> u, cost art
        flow_[u] = demand(u - m1_);
        pi_[u] = art_cost_;
      }
      link_child(root_, u);
    }
    sink_pi_.assign(static_cast<std::size_t>(m2_), 0.0);
    block_ = std::max<Arc>(static_cast<Arc>(std::sqrt(static_cast<double>(arcs_))), 10);
  }

  std::size_t run() {
    std::size_t pivots = 0;
    const std::size_t limit = 1000 + 50 * static_cast<std::size_t>(arcs_);
    while (true) {
      while (find_entering()) {
        pivot();
        if (++pivots > limit) {
          throw Error(ErrorKind::Numerical, "network simplex exceeded its pivot budget");
        }
      }
      // Refresh potentials from the tree to shed accumulated rounding, then
      // confirm optimality with a clean pricing pass.
      recompute_potentials();
      if (!find_entering()) break;
      pivot();
      ++pivots;
    }
    for (Node u = 0; u < nodes_; ++u) {
      if (pred_[u] >= arcs_ && flow_[u] > 1e-9) {
        throw Error(ErrorKind::Numerical, "transport problem infeasible: supplies and demands differ");
      }
    }
    return pivots;
  }

  double total_cost() const {
    double total = 0.0;
    for (Node u = 0; u < nodes_; ++u) {
      if (pred_[u] < arcs_) total += flow_[u] * arc_cost(pred_[u]);
    }
    return total;
  }

  Eigen::SparseMatrix<double> plan() const {
    std::vector<Eigen::Triplet<double>> entries;
    for (Node u = 0; u < nodes_; ++u) {
      const Arc a = pred_[u];
      if (a < arcs_ && flow_[u] > 0.0) {
        entries.emplace_back(static_cast<int>(a / m2_), static_cast<int>(a % m2_), flow_[u]);
      }
    }
    Eigen::SparseMatrix<double> out(m1_, m2_);
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
  }

 private:
  using Node = std::int32_t;
  using Arc = std::int64_t;
  static constexpr Node kNone = -1;

  Node source(Arc a) const {
    if (a < arcs_) return static_cast<Node>(a / m2_);
    const Node u = static_cast<Node>(a - arcs_);
    return u < m1_ ? u : root_;
  }
  Node target(Arc a) const {
    if (a < arcs_) return m1_ + static_cast<Node>(a % m2_);
    const Node u = static_cast<Node>(a - arcs_);
    return u < m1_ ? root_ : u;
  }
  double arc_cost(Arc a) const {
    if (a < arcs_) return cost_.data()[a];
    return (a - arcs_) < m1_ ? 0.0 : art_cost_;
  }

  bool in_tree(Arc a, Node i, Node j) const { return pred_[i] == a || pred_[j] == a; }

  bool is_leaf(Node x) const { return x != root_ && first_child_[x] == kNone; }

  // Tree arcs have zero reduced cost: c + pi[src] - pi[tgt] = 0.
  double derived_pi(Node x) const {
    const double c = arc_cost(pred_[x]);
    return up_[x] ? pi_[parent_[x]] - c : pi_[parent_[x]] + c;
  }
  double pi_of(Node x) const { return is_leaf(x) ? derived_pi(x) : pi_[x]; }
  Node depth_of(Node x) const { return is_leaf(x) ? depth_[parent_[x]] + 1 : depth_[x]; }

  bool find_entering() {
    if (arcs_ == 0) return false;
    double best = 0.0;
    Arc best_arc = kNone;
    Arc a = next_arc_;
    Node i = static_cast<Node>(a / m2_);
    Node j = static_cast<Node>(a % m2_);
    Arc count = block_;
    const double* c = cost_.data();
    for (Node t = 0; t < m2_; ++t) sink_pi_[t] = pi_of(m1_ + t);
    double pi_i = pi_of(i);
    for (Arc scanned = 0; scanned < arcs_; ++scanned) {
      const double rc = c[a] + pi_i - sink_pi_[j];
      if (rc < best) {
        const double scale = std::max({std::abs(c[a]), std::abs(pi_i), std::abs(sink_pi_[j])});
        if (rc < -kRelTol * scale && !in_tree(a, i, m1_ + j)) {
          best = rc;
          best_arc = a;
        }
      }
      if (++a == arcs_) {
        a = 0;
        i = 0;
        j = 0;
        pi_i = pi_of(i);
      } else if (++j == m2_) {
        j = 0;
        ++i;
        pi_i = pi_of(i);
      }
      if (--count == 0) {
        if (best_arc != kNone) break;
        count = block_;
      }
    }
    if (best_arc == kNone) return false;
    entering_ = best_arc;
    next_arc_ = a;
    return true;
  }

  void pivot() {
    const Arc e = entering_;
    const Node p = source(e);
    const Node q = target(e);

    Node u = p, v = q;
    Node du = depth_of(u), dv = depth_of(v);
    while (u != v) {
      if (du >= dv) {
        u = parent_[u];
        --du;
      } else {
        v = parent_[v];
        --dv;
      }
    }
    const Node join = u;

    // Flow is pushed p -> q, up to the join, then back down to p. Blocking
    // arcs are the ones traversed against their orientation. Ties pick the
    // last blocking arc in cycle order (strongly feasible trees).
    double delta = std::numeric_limits<double>::infinity();
    Node out = kNone;
    bool out_on_source_side = false;
    for (Node w = p; w != join; w = parent_[w]) {
      if (up_[w] && flow_[w] < delta) {
        delta = flow_[w];
        out = w;
        out_on_source_side = true;
      }
    }
    for (Node w = q; w != join; w = parent_[w]) {
      if (!up_[w] && flow_[w] <= delta) {
        delta = flow_[w];
        out = w;
        out_on_source_side = false;
      }
    }
    if (out == kNone) throw Error(ErrorKind::Numerical, "transport problem is unbounded");

    if (delta > 0.0) {
      for (Node w = p; w != join; w = parent_[w]) flow_[w] += up_[w] ? -delta : delta;
      for (Node w = q; w != join; w = parent_[w]) flow_[w] += up_[w] ? delta : -delta;
    }

    const Node in = out_on_source_side ? p : q;
    const Node anchor = out_on_source_side ? q : p;
    const double rc = arc_cost(e) + pi_of(p) - pi_of(q);
    const double shift = (in == p) ? -rc : rc;
    // `in` and `anchor` may turn from leaves into internal nodes below.
    pi_[in] = pi_of(in);
    pi_[anchor] = pi_of(anchor);
    depth_[anchor] = depth_of(anchor);

    // Reverse the stem in -> out and hang it below `anchor` via e.
    Arc carry_pred = e;
    char carry_up = (in == p) ? 1 : 0;
    double carry_flow = delta;
    Node new_parent = anchor;
    Node w = in;
    while (true) {
      const Node old_parent = parent_[w];
      const Arc old_pred = pred_[w];
      const char old_up = up_[w];
      const double old_flow = flow_[w];
      unlink_child(old_parent, w);
      parent_[w] = new_parent;
      pred_[w] = carry_pred;
      up_[w] = carry_up;
      flow_[w] = carry_flow;
      link_child(new_parent, w);
      if (w == out) break;
      carry_pred = old_pred;
      carry_up = static_cast<char>(!old_up);
      carry_flow = old_flow;
      new_parent = w;
      w = old_parent;
    }

    // Refresh depth and potentials across the re-hung subtree.
    stack_.clear();
    stack_.push_back(in);
    while (!stack_.empty()) {
      const Node x = stack_.back();
      stack_.pop_back();
      depth_[x] = depth_[parent_[x]] + 1;
      pi_[x] += shift;
      for (Node c = first_child_[x]; c != kNone && !is_leaf(c); c = next_sib_[c]) stack_.push_back(c);
    }
  }

  void recompute_potentials() {
    stack_.clear();
    for (Node c = first_child_[root_]; c != kNone; c = next_sib_[c]) stack_.push_back(c);
    pi_[root_] = 0.0;
    while (!stack_.empty()) {
      const Node x = stack_.back();
      stack_.pop_back();
      pi_[x] = derived_pi(x);
      depth_[x] = depth_[parent_[x]] + 1;
      for (Node c = first_child_[x]; c != kNone; c = next_sib_[c]) stack_.push_back(c);
    }
  }

  // Child lists keep internal nodes ahead of leaves, so subtree walks stop
  // at the first leaf child.
  void link_child(Node parent, Node child) {
    const bool was_leaf = is_leaf(parent);
    attach(parent, child);
    if (was_leaf) reposition(parent);
  }

  void unlink_child(Node parent, Node child) {
    detach(parent, child);
    if (is_leaf(parent)) reposition(parent);
  }

  void reposition(Node x) {
    if (x == root_) return;
    detach(parent_[x], x);
    attach(parent_[x], x);
  }

  void attach(Node parent, Node child) {
    if (is_leaf(child)) {
      prev_sib_[child] = last_child_[parent];
      next_sib_[child] = kNone;
      if (last_child_[parent] != kNone) {
        next_sib_[last_child_[parent]] = child;
      } else {
        first_child_[parent] = child;
      }
      last_child_[parent] = child;
    } else {
      prev_sib_[child] = kNone;
      next_sib_[child] = first_child_[parent];
      if (first_child_[parent] != kNone) {
        prev_sib_[first_child_[parent]] = child;
      } else {
        last_child_[parent] = child;
      }
      first_child_[parent] = child;
    }
  }

  void detach(Node parent, Node child) {
    if (prev_sib_[child] != kNone) {
      next_sib_[prev_sib_[child]] = next_sib_[child];
    } else {
      first_child_[parent] = next_sib_[child];
    }
    if (next_sib_[child] != kNone) {
      prev_sib_[next_sib_[child]] = prev_sib_[child];
    } else {
      last_child_[parent] = prev_sib_[child];
    }
    prev_sib_[child] = next_sib_[child] = kNone;
  }

  static constexpr double kRelTol = 64.0 * std::numeric_limits<double>::epsilon();

  Node m1_, m2_, nodes_, root_;
  Arc arcs_;
  const RowMatrix<double>& cost_;
  double art_cost_ = 0.0;

  std::vector<Node> parent_;
  std::vector<Arc> pred_;
  std::vector<char> up_;  // tree arc oriented node -> parent
  std::vector<double> flow_;
  std::vector<double> pi_;
  std::vector<Node> depth_;
  std::vector<Node> first_child_, last_child_, next_sib_, prev_sib_;
  std::vector<Node> stack_;
  std::vector<double> sink_pi_;

  Arc block_ = 10;
  Arc next_arc_ = 0;
  Arc entering_ = kNone;
};

void check_weights(const VectorXd& w, const char* name) {
  if (w.size() == 0) throw Error(ErrorKind::Argument, std::string(name) + " has no atoms");
  if (!w.allFinite() || (w.array() < 0.0).any()) {
    throw Error(ErrorKind::Validation, std::string(name) + " weights must be finite and nonnegative");
  }
  if (std::abs(w.sum() - 1.0) > 1e-6) {
    throw Error(ErrorKind::Validation, std::string(name) + " weights sum to " +
                                           std::to_string(w.sum()) + ", expected 1");
  }
}

}  // namespace

TransportResult solve_transport(const VectorXd& a, const VectorXd& b, const RowMatrix<double>& cost,
                                bool want_plan) {
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw Error(ErrorKind::Argument, "cost matrix shape does not match the marginals");
  }
  if (a.size() + b.size() >= std::numeric_limits<std::int32_t>::max()) {
    throw Error(ErrorKind::Argument, "transport problem too large");
  }
  // Pricing keeps a copy of the demand-side potentials, so the larger side
  // goes first.
  const bool transpose = a.size() < b.size();
  const RowMatrix<double> flipped = transpose ? RowMatrix<double>(cost.transpose()) : RowMatrix<double>();
  BipartiteSimplex simplex(transpose ? b : a, transpose ? a : b, transpose ? flipped : cost);
  TransportResult result;
  result.pivots = simplex.run();
  result.cost = std::max(simplex.total_cost(), 0.0);
  result.distance = std::sqrt(result.cost);
  if (want_plan) result.plan = transpose ? Eigen::SparseMatrix<double>(simplex.plan().transpose()) : simplex.plan();
  return result;
}

RowMatrix<double> squared_distances(const MatrixXd& p, const MatrixXd& q) {
  RowMatrix<double> cost(p.rows(), q.rows());
  const MatrixXd qt = q.transpose();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    cost.row(i) = (qt.colwise() - p.row(i).transpose()).colwise().squaredNorm();
  }
  return cost;
}

TransportResult wasserstein(const WeightedParticles& p, const WeightedParticles& q, bool want_plan) {
  if (p.dimension() != q.dimension()) {
    throw Error(ErrorKind::Argument, "dimension mismatch: " + std::to_string(p.dimension()) +
                                         " vs " + std::to_string(q.dimension()));
  }
  if (p.points.rows() != p.weights.size() || q.points.rows() != q.weights.size()) {
    throw Error(ErrorKind::Argument, "points and weights differ in length");
  }
  check_weights(p.weights, "first measure");
  check_weights(q.weights, "second measure");
  const VectorXd a = p.weights / p.weights.sum();
  const VectorXd b = q.weights / q.weights.sum();
  return solve_transport(a, b, squared_distances(p.points, q.points), want_plan);
}

}  // namespace mmsb
