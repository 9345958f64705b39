// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#include "dzsl/autodiff.hpp"

#include "dzsl/errors.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace dzsl::ad {
namespace {

thread_local bool g_grad_enabled = true;
// Nodes whose gradient the running grad() call needs; ops may skip the rest.
thread_local const std::unordered_set<const Node*>* g_needed = nullptr;

bool needed(const Var& v) { return g_needed == nullptr || g_needed->count(v.node().get()) != 0; }

using BackwardFn = std::function<std::vector<Var>(const Var&)>;

Var make_op(Matrix value, std::vector<Var> inputs, BackwardFn backward, bool smooth = true) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Var& v) { return v.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->smooth = smooth;
      node->parents.reserve(inputs.size());
      for (const auto& v : inputs) node->parents.push_back(v.node());
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw DimensionError("item() on a non-scalar");
  return node_->value(0, 0);
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var custom_op(Matrix value, std::vector<Var> inputs,
              std::function<std::vector<Var>(const Var&)> backward, bool smooth) {
  return make_op(std::move(value), std::move(inputs), std::move(backward), smooth);
}

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw DimensionError("grad: output must be a scalar");
  }

  // Iterative post-order DFS over nodes that require grad.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  if (output.requires_grad()) {
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(output.node().get(), 0);
    visited.insert(output.node().get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* parent = node->parents[next++].get();
        if (parent->requires_grad && visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  // Only nodes with a path to a requested input need a gradient.
  std::unordered_set<const Node*> relevant;
  for (const auto& input : inputs) {
    if (input.defined()) relevant.insert(input.node().get());
  }
  for (Node* node : order) {
    for (const auto& parent : node->parents) {
      if (relevant.count(parent.get()) != 0) {
        relevant.insert(node);
        break;
      }
    }
  }

  std::unordered_map<Node*, Var> grads;
  {
    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();
    const auto* previous_needed = g_needed;
    g_needed = &relevant;
    struct Restore {
      const std::unordered_set<const Node*>* prev;
      ~Restore() { g_needed = prev; }
    } restore{previous_needed};

    if (output.requires_grad()) grads[output.node().get()] = constant(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto found = grads.find(node);
      if (found == grads.end() || !node->backward || relevant.count(node) == 0) continue;
      if (create_graph && !node->smooth) {
        throw Error("grad: create_graph requested through a first-order-only op");
      }
      std::vector<Var> parent_grads = node->backward(found->second);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        Node* parent = node->parents[i].get();
        if (!parent->requires_grad || i >= parent_grads.size() || !parent_grads[i].defined() ||
            relevant.count(parent) == 0) {
          continue;
        }
        auto slot = grads.find(parent);
        if (slot == grads.end()) {
          grads.emplace(parent, parent_grads[i]);
        } else {
          slot->second = add(slot->second, parent_grads[i]);
        }
      }
    }
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& input : inputs) {
    auto found = grads.find(input.node().get());
    if (found == grads.end()) {
      result.push_back(constant(Matrix::Zero(input.rows(), input.cols())));
    } else {
      result.push_back(found->second);
    }
  }
  return result;
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b},
                 [](const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b},
                 [](const Var& g) { return std::vector<Var>{g, neg(g)}; });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Var& g) {
    return std::vector<Var>{mul(g, b), mul(g, a)};
  });
}

Var neg(const Var& a) {
  return make_op(-a.value(), {a}, [](const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var scale(const Var& a, double factor) {
  return make_op(a.value() * factor, {a},
                 [factor](const Var& g) { return std::vector<Var>{scale(g, factor)}; });
}

Var add_scalar(const Var& a, double offset) {
  return make_op(a.value().array() + offset, {a},
                 [](const Var& g) { return std::vector<Var>{g}; });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()));
  }
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [a, b](const Var& g) {
    std::vector<Var> grads(2);
    if (!grad_enabled()) {
      if (needed(a)) grads[0] = constant(g.value() * b.value().transpose());
      if (needed(b)) grads[1] = constant(a.value().transpose() * g.value());
      return grads;
    }
    if (needed(a)) grads[0] = matmul(g, transpose(b));
    if (needed(b)) grads[1] = matmul(transpose(a), g);
    return grads;
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a},
                 [](const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var add_rowvec(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw DimensionError("add_rowvec: bias shape");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return make_op(std::move(out), {a, b},
                 [](const Var& g) { return std::vector<Var>{g, sum_rows(g)}; });
}

Var broadcast_rows(const Var& a, Eigen::Index rows) {
  if (a.rows() != 1) throw DimensionError("broadcast_rows: expects a row vector");
  Matrix out = a.value().replicate(rows, 1);
  return make_op(std::move(out), {a},
                 [](const Var& g) { return std::vector<Var>{sum_rows(g)}; });
}

Var broadcast_cols(const Var& a, Eigen::Index cols) {
  if (a.cols() != 1) throw DimensionError("broadcast_cols: expects a column vector");
  Matrix out = a.value().replicate(1, cols);
  return make_op(std::move(out), {a},
                 [](const Var& g) { return std::vector<Var>{sum_cols(g)}; });
}

Var broadcast_scalar(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (a.rows() != 1 || a.cols() != 1) throw DimensionError("broadcast_scalar: expects 1x1");
  Matrix out = Matrix::Constant(rows, cols, a.value()(0, 0));
  return make_op(std::move(out), {a}, [](const Var& g) { return std::vector<Var>{sum(g)}; });
}

Var sum_rows(const Var& a) {
  Matrix out = a.value().colwise().sum();
  const auto rows = a.rows();
  return make_op(std::move(out), {a},
                 [rows](const Var& g) { return std::vector<Var>{broadcast_rows(g, rows)}; });
}

Var sum_cols(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  const auto cols = a.cols();
  return make_op(std::move(out), {a},
                 [cols](const Var& g) { return std::vector<Var>{broadcast_cols(g, cols)}; });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto rows = a.rows();
  const auto cols = a.cols();
  return make_op(std::move(out), {a}, [rows, cols](const Var& g) {
    return std::vector<Var>{broadcast_scalar(g, rows, cols)};
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw DimensionError("mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("hcat: no inputs");
  const auto rows = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("hcat: row count mismatch");
    total += p.cols();
  }
  Matrix out(rows, total);
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::Index> widths;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offsets.push_back(offset);
    widths.push_back(p.cols());
    offset += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_op(std::move(out), std::move(inputs), [offsets, widths](const Var& g) {
    std::vector<Var> grads;
    grads.reserve(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      grads.push_back(slice_cols(g, offsets[i], widths[i]));
    }
    return grads;
  });
}

Var hcat(std::initializer_list<Var> parts) {
  return hcat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds");
  }
  Matrix out = a.value().middleCols(start, count);
  const auto total = a.cols();
  return make_op(std::move(out), {a}, [start, total](const Var& g) {
    return std::vector<Var>{pad_cols(g, start, total)};
  });
}

Var pad_cols(const Var& a, Eigen::Index start, Eigen::Index total) {
  if (start < 0 || start + a.cols() > total) throw DimensionError("pad_cols: range out of bounds");
  Matrix out = Matrix::Zero(a.rows(), total);
  out.middleCols(start, a.cols()) = a.value();
  const auto count = a.cols();
  return make_op(std::move(out), {a}, [start, count](const Var& g) {
    return std::vector<Var>{slice_cols(g, start, count)};
  });
}

Var square(const Var& a) { return mul(a, a); }

Var sqrt(const Var& a) {
  if ((a.value().array() < 0.0).any()) throw InvalidArgument("sqrt of a negative value");
  Matrix out = a.value().cwiseSqrt();
  return make_op(std::move(out), {a}, [a](const Var& g) {
    return std::vector<Var>{mul(g, scale(reciprocal(sqrt(a)), 0.5))};
  });
}

Var reciprocal(const Var& a) {
  Matrix out = a.value().cwiseInverse();
  return make_op(std::move(out), {a}, [a](const Var& g) {
    return std::vector<Var>{neg(mul(g, square(reciprocal(a))))};
  });
}

Var abs(const Var& a) {
  Matrix sign = a.value().unaryExpr([](double x) { return double((x > 0.0) - (x < 0.0)); });
  return make_op(a.value().cwiseAbs(), {a}, [sign = std::move(sign)](const Var& g) {
    return std::vector<Var>{mul(g, constant(sign))};
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix mask = a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
  Matrix out = a.value().cwiseProduct(mask);
  return make_op(std::move(out), {a}, [mask = std::move(mask)](const Var& g) {
    return std::vector<Var>{mul(g, constant(mask))};
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  Matrix deriv = 1.0 - out.array().square();
  return make_op(
      std::move(out), {a},
      [deriv = std::move(deriv)](const Var& g) { return std::vector<Var>{mul(g, constant(deriv))}; },
      /*smooth=*/false);
}

Var silu(const Var& a) {
  Matrix sig = (1.0 + (-a.value().array()).exp()).inverse();
  Matrix out = a.value().cwiseProduct(sig);
  Matrix deriv = sig.array() * (1.0 + a.value().array() * (1.0 - sig.array()));
  return make_op(
      std::move(out), {a},
      [deriv = std::move(deriv)](const Var& g) { return std::vector<Var>{mul(g, constant(deriv))}; },
      /*smooth=*/false);
}

}  // namespace dzsl::ad
