#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "retra/errors.hpp"
#include "retra/tensor.hpp"

namespace retra {

enum class op_kind {
    leaf,
    matmul,
    transpose,
    add,        // rhs may be a 1xC row broadcast over lhs rows
    sub,        // same broadcast rule as add
    mul,        // elementwise
    scalar_mul, // constant scalar times tensor
    concat,     // along columns
    tanh_op,
    logistic_op,
    silu_op,
    leaky_relu_op,
    softmax_rows,
    abs_op,
    sum_all,
    mse_loss,
    cross_entropy_loss,
};

struct var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

struct tape_node {
    op_kind op = op_kind::leaf;
    int a = -1;
    int b = -1;
    double c = 0.0; // scalar payload: scalar_mul factor, leaky slope
    tensor value;
    tensor grad;
    bool needs_grad = false;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// vector backwards is a valid topological order for backpropagation.
// Gradients accumulate additively: a leaf used k times collects k terms.
class graph {
public:
    bool taping = true;

    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    var leaf(tensor t, bool trainable = false) {
        check_finite(t, "leaf");
        tape_node n;
        n.op = op_kind::leaf;
        n.value = std::move(t);
        n.needs_grad = trainable && taping;
        return push(std::move(n));
    }

    const tensor& value(var v) const { return node(v).value; }

    // Valid only after backward() and only for nodes on a grad path.
    const tensor& grad(var v) const {
        const tape_node& n = node(v);
        if (n.grad.size() == 0) throw config_error("graph::grad: no gradient recorded for this node");
        return n.grad;
    }

    var matmul(var a, var b) {
        const tensor& ta = node(a).value;
        const tensor& tb = node(b).value;
        if (ta.cols() != tb.rows())
            throw dimension_error("matmul: inner dimensions differ " + ta.shape_string() + " x " + tb.shape_string());
        tensor out = tensor::zeros(ta.rows(), tb.cols());
        as_eigen(out).noalias() = as_eigen(ta) * as_eigen(tb);
        return push_op(op_kind::matmul, a, b, std::move(out));
    }

    var transpose(var a) {
        const tensor& ta = node(a).value;
        tensor out = tensor::zeros(ta.cols(), ta.rows());
        as_eigen(out) = as_eigen(ta).transpose();
        return push_op(op_kind::transpose, a, var{}, std::move(out));
    }

    var add(var a, var b) { return add_like(op_kind::add, a, b); }
    var sub(var a, var b) { return add_like(op_kind::sub, a, b); }

    var mul(var a, var b) {
        const tensor& ta = node(a).value;
        const tensor& tb = node(b).value;
        if (!ta.same_shape(tb))
            throw dimension_error("mul: shapes differ " + ta.shape_string() + " vs " + tb.shape_string());
        tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        return push_op(op_kind::mul, a, b, std::move(out));
    }

    var smul(double c, var a) {
        tensor out = node(a).value;
        for (double& v : out.data) v *= c;
        var r = push_op(op_kind::scalar_mul, a, var{}, std::move(out));
        nodes_[r.id].c = c;
        return r;
    }

    var concat(var a, var b) {
        const tensor& ta = node(a).value;
        const tensor& tb = node(b).value;
        if (ta.rows() != tb.rows())
            throw dimension_error("concat: row counts differ " + ta.shape_string() + " vs " + tb.shape_string());
        tensor out = tensor::zeros(ta.rows(), ta.cols() + tb.cols());
        for (std::size_t r = 0; r < ta.rows(); ++r) {
            for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) = ta.at(r, c);
            for (std::size_t c = 0; c < tb.cols(); ++c) out.at(r, ta.cols() + c) = tb.at(r, c);
        }
        return push_op(op_kind::concat, a, b, std::move(out));
    }

    var tanh(var a) {
        tensor out = node(a).value;
        for (double& v : out.data) v = std::tanh(v);
        return push_op(op_kind::tanh_op, a, var{}, std::move(out));
    }

    var logistic(var a) {
        tensor out = node(a).value;
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        return push_op(op_kind::logistic_op, a, var{}, std::move(out));
    }

    var silu(var a) {
        tensor out = node(a).value;
        for (double& v : out.data) v = v / (1.0 + std::exp(-v));
        return push_op(op_kind::silu_op, a, var{}, std::move(out));
    }

    var leaky_relu(var a, double slope = 0.01) {
        tensor out = node(a).value;
        for (double& v : out.data) v = v > 0.0 ? v : slope * v;
        var r = push_op(op_kind::leaky_relu_op, a, var{}, std::move(out));
        nodes_[r.id].c = slope;
        return r;
    }

    // Row-wise softmax with max subtraction; rows sum to 1 within 1e-12.
    var softmax(var a) {
        tensor out = node(a).value;
        const std::size_t rows = out.rows(), cols = out.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            double mx = out.at(r, 0);
            for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, out.at(r, c));
            double total = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                double e = std::exp(out.at(r, c) - mx);
                out.at(r, c) = e;
                total += e;
            }
            for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
        }
        return push_op(op_kind::softmax_rows, a, var{}, std::move(out));
    }

    var abs(var a) {
        tensor out = node(a).value;
        for (double& v : out.data) v = std::fabs(v);
        return push_op(op_kind::abs_op, a, var{}, std::move(out));
    }

    var sum(var a) {
        double total = 0.0;
        for (double v : node(a).value.data) total += v;
        return push_op(op_kind::sum_all, a, var{}, tensor::scalar(total));
    }

    // Mean over all elements of the squared residual.
    var mse(var pred, var target) {
        const tensor& p = node(pred).value;
        const tensor& t = node(target).value;
        if (!p.same_shape(t))
            throw dimension_error("mse: shapes differ " + p.shape_string() + " vs " + t.shape_string());
        double total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = p[i] - t[i];
            total += d * d;
        }
        return push_op(op_kind::mse_loss, pred, target, tensor::scalar(total / static_cast<double>(p.size())));
    }

    // Mean over rows of -sum_k target_k * log(pred_k + 1e-12).
    var cross_entropy(var pred, var target) {
        const tensor& p = node(pred).value;
        const tensor& t = node(target).value;
        if (!p.same_shape(t))
            throw dimension_error("cross_entropy: shapes differ " + p.shape_string() + " vs " + t.shape_string());
        double total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] < 0.0) throw numeric_error("cross_entropy: negative probability input");
            total -= t[i] * std::log(p[i] + 1e-12);
        }
        return push_op(op_kind::cross_entropy_loss, pred, target,
                       tensor::scalar(total / static_cast<double>(p.rows())));
    }

    void backward(var root) {
        tape_node& rn = node(root);
        if (rn.value.size() != 1) throw config_error("backward: root must be scalar");
        if (!taping || (rn.op != op_kind::leaf && rn.a < 0))
            throw config_error("backward: value was not taped");
        for (tape_node& n : nodes_) n.grad = tensor();
        rn.grad = rn.value;
        rn.grad.data[0] = 1.0;
        for (int i = root.id; i >= 0; --i) {
            tape_node& n = nodes_[i];
            if (n.grad.size() == 0) continue;
            pull_back(n);
        }
    }

private:
    std::vector<tape_node> nodes_;

    tape_node& node(var v) {
        if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
            throw config_error("graph: invalid node handle");
        return nodes_[static_cast<std::size_t>(v.id)];
    }
    const tape_node& node(var v) const {
        if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
            throw config_error("graph: invalid node handle");
        return nodes_[static_cast<std::size_t>(v.id)];
    }

    var push(tape_node&& n) {
        nodes_.push_back(std::move(n));
        return var{static_cast<int>(nodes_.size()) - 1};
    }

    var push_op(op_kind op, var a, var b, tensor&& out) {
        check_finite(out, op_name(op));
        tape_node n;
        n.op = op;
        if (taping) {
            n.a = a.id;
            n.b = b.valid() ? b.id : -1;
            n.needs_grad = node(a).needs_grad || (b.valid() && node(b).needs_grad);
        }
        n.value = std::move(out);
        return push(std::move(n));
    }

    var add_like(op_kind op, var a, var b) {
        const tensor& ta = node(a).value;
        const tensor& tb = node(b).value;
        const bool broadcast = tb.rows() == 1 && ta.cols() == tb.cols() && ta.rows() != 1;
        if (!broadcast && !ta.same_shape(tb))
            throw dimension_error(std::string(op_name(op)) + ": shapes differ " + ta.shape_string() + " vs " +
                                  tb.shape_string());
        const double sign = op == op_kind::sub ? -1.0 : 1.0;
        tensor out = ta;
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t c = 0; c < out.cols(); ++c)
                out.at(r, c) += sign * (broadcast ? tb.at(0, c) : tb.at(r, c));
        return push_op(op, a, b, std::move(out));
    }

    void ensure_grad(int id) {
        tape_node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) n.grad = tensor::zeros(n.value.rows(), n.value.cols());
    }

    // Gradient flows only where a trainable leaf sits underneath; frozen
    // subgraphs (target nets, critic weights during actor steps) are skipped.
    bool wants(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }

    void pull_back(tape_node& n) {
        switch (n.op) {
        case op_kind::leaf:
            return;
        case op_kind::matmul: {
            const tensor& ta = nodes_[n.a].value;
            const tensor& tb = nodes_[n.b].value;
            if (wants(n.a)) {
                ensure_grad(n.a);
                as_eigen(nodes_[n.a].grad).noalias() += as_eigen(n.grad) * as_eigen(tb).transpose();
            }
            if (wants(n.b)) {
                ensure_grad(n.b);
                as_eigen(nodes_[n.b].grad).noalias() += as_eigen(ta).transpose() * as_eigen(n.grad);
            }
            return;
        }
        case op_kind::transpose:
            if (wants(n.a)) {
                ensure_grad(n.a);
                as_eigen(nodes_[n.a].grad) += as_eigen(n.grad).transpose();
            }
            return;
        case op_kind::add:
        case op_kind::sub: {
            const double sign = n.op == op_kind::sub ? -1.0 : 1.0;
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
            }
            if (wants(n.b)) {
                ensure_grad(n.b);
                tensor& gb = nodes_[n.b].grad;
                if (gb.rows() == n.grad.rows()) {
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += sign * n.grad[i];
                } else { // row broadcast: fold rows back into the 1xC operand
                    for (std::size_t r = 0; r < n.grad.rows(); ++r)
                        for (std::size_t c = 0; c < n.grad.cols(); ++c) gb.at(0, c) += sign * n.grad.at(r, c);
                }
            }
            return;
        }
        case op_kind::mul: {
            const tensor& ta = nodes_[n.a].value;
            const tensor& tb = nodes_[n.b].value;
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * tb[i];
            }
            if (wants(n.b)) {
                ensure_grad(n.b);
                tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * ta[i];
            }
            return;
        }
        case op_kind::scalar_mul:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.c * n.grad[i];
            }
            return;
        case op_kind::concat: {
            const std::size_t ca = nodes_[n.a].value.cols();
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t r = 0; r < ga.rows(); ++r)
                    for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += n.grad.at(r, c);
            }
            if (wants(n.b)) {
                ensure_grad(n.b);
                tensor& gb = nodes_[n.b].grad;
                for (std::size_t r = 0; r < gb.rows(); ++r)
                    for (std::size_t c = 0; c < gb.cols(); ++c) gb.at(r, c) += n.grad.at(r, ca + c);
            }
            return;
        }
        case op_kind::tanh_op:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
            }
            return;
        case op_kind::logistic_op:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
            }
            return;
        case op_kind::silu_op:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                const tensor& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < ga.size(); ++i) {
                    const double s = 1.0 / (1.0 + std::exp(-x[i]));
                    ga[i] += n.grad[i] * s * (1.0 + x[i] * (1.0 - s));
                }
            }
            return;
        case op_kind::leaky_relu_op:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                const tensor& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * (x[i] > 0.0 ? 1.0 : n.c);
            }
            return;
        case op_kind::softmax_rows:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                const std::size_t rows = n.value.rows(), cols = n.value.cols();
                for (std::size_t r = 0; r < rows; ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) dot += n.grad.at(r, c) * n.value.at(r, c);
                    for (std::size_t c = 0; c < cols; ++c)
                        ga.at(r, c) += n.value.at(r, c) * (n.grad.at(r, c) - dot);
                }
            }
            return;
        case op_kind::abs_op:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                const tensor& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += n.grad[i] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
            }
            return;
        case op_kind::sum_all:
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (double& v : ga.data) v += n.grad[0];
            }
            return;
        case op_kind::mse_loss: {
            const tensor& p = nodes_[n.a].value;
            const tensor& t = nodes_[n.b].value;
            const double w = 2.0 * n.grad[0] / static_cast<double>(p.size());
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w * (p[i] - t[i]);
            }
            if (wants(n.b)) {
                ensure_grad(n.b);
                tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= w * (p[i] - t[i]);
            }
            return;
        }
        case op_kind::cross_entropy_loss: {
            const tensor& p = nodes_[n.a].value;
            const tensor& t = nodes_[n.b].value;
            const double w = n.grad[0] / static_cast<double>(p.rows());
            if (wants(n.a)) {
                ensure_grad(n.a);
                tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= w * t[i] / (p[i] + 1e-12);
            }
            if (wants(n.b)) {
                ensure_grad(n.b);
                tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= w * std::log(p[i] + 1e-12);
            }
            return;
        }
        }
    }

    static const char* op_name(op_kind op) {
        switch (op) {
        case op_kind::leaf: return "leaf";
        case op_kind::matmul: return "matmul";
        case op_kind::transpose: return "transpose";
        case op_kind::add: return "add";
        case op_kind::sub: return "sub";
        case op_kind::mul: return "mul";
        case op_kind::scalar_mul: return "scalar_mul";
        case op_kind::concat: return "concat";
        case op_kind::tanh_op: return "tanh";
        case op_kind::logistic_op: return "logistic";
        case op_kind::silu_op: return "silu";
        case op_kind::leaky_relu_op: return "leaky_relu";
        case op_kind::softmax_rows: return "softmax";
        case op_kind::abs_op: return "abs";
        case op_kind::sum_all: return "sum";
        case op_kind::mse_loss: return "mse";
        case op_kind::cross_entropy_loss: return "cross_entropy";
        }
        return "?";
    }

    static void check_finite(const tensor& t, const char* where) {
        if (!t.all_finite()) throw numeric_error(std::string(where) + ": non-finite value produced");
    }
};

}
