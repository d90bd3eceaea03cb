/**
 * Copyright 2026 The RankMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef RANKMATCH_AD_GRAPH_HPP_
#define RANKMATCH_AD_GRAPH_HPP_

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rankmatch/ad/tensor.hpp"
#include "rankmatch/core/error.hpp"

namespace rankmatch::ad {

/// Handle to a node inside one GraphT instance.
struct NodeRef {
  Index id = -1;
  bool valid() const { return id >= 0; }
};

template <typename Scalar>
class GraphT;

/// Operator interface. Ops are owned by their node, may cache forward
/// intermediates in members (a graph is driven by one execution context at a
/// time), and accumulate parent gradients in backward. Loss modules extend
/// the graph by subclassing this.
template <typename Scalar>
class OpT {
 public:
  virtual ~OpT() = default;

  virtual std::string_view kind() const = 0;

  /// Computes the output value from parent values.
  virtual TensorT<Scalar> forward(
      const std::vector<const TensorT<Scalar>*>& in) = 0;

  /// Accumulates d(loss)/d(parent) into in_grads. in_grads[i] is pre-sized,
  /// zero-initialized on first touch, and nullptr when parent i does not
  /// require gradients. Must be linear in out_grad.
  virtual void backward(const std::vector<const TensorT<Scalar>*>& in,
                        const TensorT<Scalar>& value,
                        const TensorT<Scalar>& out_grad,
                        const std::vector<TensorT<Scalar>*>& in_grads) = 0;
};

template <typename Scalar>
struct NodeT {
  std::unique_ptr<OpT<Scalar>> op;  // null for leaves (inputs and constants)
  std::vector<Index> parents;
  std::vector<Index> shape;
  std::string label;
  bool requires_grad = false;
  bool is_input = false;
  bool has_value = false;
  bool has_grad = false;
  TensorT<Scalar> value;
  TensorT<Scalar> grad;
};

/// Reverse-mode tape. Nodes are appended in topological order (insertion
/// order is evaluation order); the structure is immutable once built, only
/// values and gradient slots change across forward/backward passes.
template <typename Scalar>
class GraphT {
 public:
  using Tensor = TensorT<Scalar>;

  /// Declares a bindable leaf. Gradients flow into it iff requires_grad.
  NodeRef input(const std::string& name, std::vector<Index> shape,
                bool requires_grad = false) {
    if (inputs_by_name_.count(name)) {
      throw Error("duplicate graph input '" + name + "'");
    }
    NodeT<Scalar> node;
    node.shape = std::move(shape);
    node.label = name;
    node.requires_grad = requires_grad;
    node.is_input = true;
    const NodeRef ref = push(std::move(node));
    inputs_by_name_.emplace(name, ref.id);
    return ref;
  }

  /// Embeds a fixed value (targets, masks, detached predictions). Constants
  /// never carry gradients, which is what detaches pseudo-labels.
  NodeRef constant(Tensor value, std::string label = "const") {
    NodeT<Scalar> node;
    node.shape = value.shape();
    node.label = std::move(label);
    node.value = std::move(value);
    node.has_value = true;
    return push(std::move(node));
  }

  /// Appends an op node. out_shape must be the shape forward will produce;
  /// builders validate parent shapes before calling this.
  NodeRef apply(std::unique_ptr<OpT<Scalar>> op, std::vector<NodeRef> parents,
                std::vector<Index> out_shape) {
    NodeT<Scalar> node;
    node.label = std::string(op->kind()) + "#" +
                 std::to_string(static_cast<long long>(nodes_.size()));
    node.op = std::move(op);
    node.shape = std::move(out_shape);
    node.parents.reserve(parents.size());
    for (const NodeRef p : parents) {
      check_ref(p);
      node.parents.push_back(p.id);
      node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
    }
    return push(std::move(node));
  }

  void bind(const std::string& name, Tensor value) {
    const auto it = inputs_by_name_.find(name);
    if (it == inputs_by_name_.end()) {
      throw Error("bind: no graph input named '" + name + "'");
    }
    NodeT<Scalar>& node = nodes_[it->second];
    if (value.shape() != node.shape) {
      throw ShapeError("bind: input '" + name + "' expects shape " +
                       shape_string(node.shape) + ", got " +
                       shape_string(value.shape()));
    }
    node.value = std::move(value);
    node.has_value = true;
    forward_done_ = false;
  }

  /// When strict, leaf values are checked for non-finite entries at forward
  /// time and rejected with the node name.
  void set_strict(bool strict) { strict_ = strict; }

  /// Evaluates every node in insertion order. Deterministic: fixed order,
  /// no threading, ops are pure functions of parent values.
  void forward() {
    std::vector<const Tensor*> in;
    for (auto& node : nodes_) {
      if (!node.op) {
        if (!node.has_value) {
          throw Error("forward: unbound input '" + node.label + "'");
        }
        if (strict_ && !node.value.all_finite()) {
          throw NumericError("forward: non-finite value in node '" +
                             node.label + "'");
        }
        continue;
      }
      in.clear();
      in.reserve(node.parents.size());
      for (const Index p : node.parents) in.push_back(&nodes_[p].value);
      node.value = node.op->forward(in);
      if (node.value.shape() != node.shape) {
        throw ShapeError("forward: node '" + node.label + "' produced shape " +
                         shape_string(node.value.shape()) + ", declared " +
                         shape_string(node.shape));
      }
      node.has_value = true;
    }
    forward_done_ = true;
  }

  /// Reverse pass from `output`, seeding with `seed` (same shape as output).
  /// Gradients accumulate across fan-out; leaves end up with their gradient
  /// both in grad(ref) and in the leaf tensor's grad slot.
  void backward(NodeRef output, const Tensor& seed) {
    check_ref(output);
    if (!forward_done_) throw Error("backward called before forward");
    NodeT<Scalar>& out = nodes_[output.id];
    if (seed.shape() != out.shape) {
      throw ShapeError("backward: seed shape " + shape_string(seed.shape()) +
                       " does not match output shape " +
                       shape_string(out.shape));
    }
    for (auto& node : nodes_) {
      node.has_grad = false;
      if (node.requires_grad) {
        node.grad = Tensor(node.shape);
        node.has_grad = true;
      }
      if (node.is_input) node.value.drop_grad();
    }
    if (!out.has_grad) {
      out.grad = Tensor(out.shape);
      out.has_grad = true;
    }
    out.grad.flat() = seed.flat();

    std::vector<const Tensor*> in;
    std::vector<Tensor*> in_grads;
    for (Index id = output.id; id >= 0; --id) {
      NodeT<Scalar>& node = nodes_[id];
      if (!node.op || !node.has_grad || !node.requires_grad) continue;
      in.clear();
      in_grads.clear();
      for (const Index p : node.parents) {
        in.push_back(&nodes_[p].value);
        in_grads.push_back(nodes_[p].has_grad ? &nodes_[p].grad : nullptr);
      }
      node.op->backward(in, node.value, node.grad, in_grads);
    }
    for (auto& node : nodes_) {
      if (node.is_input && node.has_grad) {
        node.value.set_grad(
            std::vector<Scalar>(node.grad.data(), node.grad.data() + node.grad.size()));
      }
    }
  }

  bool forwarded() const { return forward_done_; }

  const Tensor& value(NodeRef ref) const {
    check_ref(ref);
    const NodeT<Scalar>& node = nodes_[ref.id];
    if (!node.has_value) {
      throw Error("value of node '" + node.label + "' read before forward");
    }
    return node.value;
  }

  const Tensor& grad(NodeRef ref) const {
    check_ref(ref);
    const NodeT<Scalar>& node = nodes_[ref.id];
    if (!node.has_grad) {
      throw Error("gradient of node '" + node.label +
                  "' read before backward (or node does not require grad)");
    }
    return node.grad;
  }

  OpT<Scalar>* op(NodeRef ref) {
    check_ref(ref);
    return nodes_[ref.id].op.get();
  }

  const std::string& label(NodeRef ref) const {
    check_ref(ref);
    return nodes_[ref.id].label;
  }

  const std::vector<Index>& shape(NodeRef ref) const {
    check_ref(ref);
    return nodes_[ref.id].shape;
  }

  bool requires_grad(NodeRef ref) const {
    check_ref(ref);
    return nodes_[ref.id].requires_grad;
  }

  Index node_count() const { return static_cast<Index>(nodes_.size()); }

  void mark_output(const std::string& name, NodeRef ref) {
    check_ref(ref);
    outputs_by_name_[name] = ref.id;
  }

  const std::map<std::string, Index>& outputs() const {
    return outputs_by_name_;
  }

 private:
  NodeRef push(NodeT<Scalar> node) {
    nodes_.push_back(std::move(node));
    return NodeRef{static_cast<Index>(nodes_.size()) - 1};
  }

  void check_ref(NodeRef ref) const {
    if (!ref.valid() || ref.id >= static_cast<Index>(nodes_.size())) {
      throw Error("invalid node reference");
    }
  }

  std::vector<NodeT<Scalar>> nodes_;
  std::map<std::string, Index> inputs_by_name_;
  std::map<std::string, Index> outputs_by_name_;
  bool forward_done_ = false;
  bool strict_ = false;
};

using Graph = GraphT<Real>;

/// Binds `inputs` and runs a forward pass; returns the values of every node
/// registered with mark_output.
template <typename Scalar>
std::map<std::string, TensorT<Scalar>> forward_eval(
    GraphT<Scalar>& graph,
    const std::map<std::string, TensorT<Scalar>>& inputs) {
  for (const auto& [name, value] : inputs) graph.bind(name, value);
  graph.forward();
  std::map<std::string, TensorT<Scalar>> out;
  for (const auto& [name, id] : graph.outputs()) {
    out.emplace(name, graph.value(NodeRef{id}));
  }
  return out;
}

}  // namespace rankmatch::ad

#endif  // RANKMATCH_AD_GRAPH_HPP_
