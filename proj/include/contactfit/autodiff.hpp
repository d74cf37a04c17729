#pragma once

// Reverse-mode automatic differentiation on a linear tape.
//
// Every elementary operation appends one node with at most two parents and
// the local partials with respect to them.  A backward sweep over the tape
// then yields adjoints for every node in one pass.  Value is a cheap handle
// (tape pointer + node index + cached value); a Value with a null tape is a
// plain constant, which lets templated numeric code mix literals and tracked
// quantities without caring which is which.
//
// min/max do not create nodes: they return the chosen argument, so the
// gradient is the subgradient at the argmin (ties resolved towards the
// first argument).

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace contactfit::ad {

class Tape {
public:
    Tape() = default;

    int input(double v) { return push(v, -1, 0.0, -1, 0.0); }
    int unary(double v, int a, double da) { return push(v, a, da, -1, 0.0); }
    int binary(double v, int a, double da, int b, double db) {
        return push(v, a, da, b, db);
    }

    double value(int i) const { return vals_[i]; }
    std::size_t size() const { return vals_.size(); }

    // Drops all nodes but keeps the allocations for the next build.
    void reset() {
        vals_.clear();
        parents_.clear();
        partials_.clear();
    }

    void reserve(std::size_t n) {
        vals_.reserve(n);
        parents_.reserve(2 * n);
        partials_.reserve(2 * n);
    }

    // Adjoint of every node with respect to node `root`.
    std::vector<double> adjoints(int root) const {
        std::vector<double> adj(vals_.size(), 0.0);
        if (root < 0) return adj;
        adj[static_cast<std::size_t>(root)] = 1.0;
        for (int i = root; i >= 0; --i) {
            const double a = adj[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            const std::size_t k = 2 * static_cast<std::size_t>(i);
            if (parents_[k] >= 0) adj[static_cast<std::size_t>(parents_[k])] += partials_[k] * a;
            if (parents_[k + 1] >= 0)
                adj[static_cast<std::size_t>(parents_[k + 1])] += partials_[k + 1] * a;
        }
        return adj;
    }

private:
    int push(double v, int a, double da, int b, double db) {
        vals_.push_back(v);
        parents_.push_back(a);
        parents_.push_back(b);
        partials_.push_back(da);
        partials_.push_back(db);
        return static_cast<int>(vals_.size()) - 1;
    }

    std::vector<double> vals_;
    std::vector<int> parents_;      // 2 per node, -1 = none
    std::vector<double> partials_;  // 2 per node
};

class Value {
public:
    Value() = default;
    Value(double constant) : val_(constant) {}  // NOLINT: implicit by design
    Value(Tape& tape, int index) : tape_(&tape), idx_(index), val_(tape.value(index)) {}

    static Value variable(Tape& tape, double v) { return Value(tape, tape.input(v)); }

    Tape* tape() const { return tape_; }
    int index() const { return idx_; }
    double value() const { return val_; }
    bool tracked() const { return tape_ != nullptr; }

private:
    friend Value make_node1(Tape* t, double v, const Value& a, double da);
    friend Value make_node2(double v, const Value& a, double da, const Value& b, double db);

    Tape* tape_ = nullptr;
    int idx_ = -1;
    double val_ = 0.0;
};

inline double value_of(double x) { return x; }
inline double value_of(const Value& x) { return x.value(); }

inline Value make_node1(Tape* t, double v, const Value& a, double da) {
    if (!t) return Value(v);
    return Value(*t, t->unary(v, a.index(), da));
}

inline Value make_node2(double v, const Value& a, double da, const Value& b, double db) {
    Tape* t = a.tape() ? a.tape() : b.tape();
    if (!t) return Value(v);
    assert(!a.tape() || !b.tape() || a.tape() == b.tape());
    if (a.tape() && b.tape()) return Value(*t, t->binary(v, a.index(), da, b.index(), db));
    if (a.tape()) return Value(*t, t->unary(v, a.index(), da));
    return Value(*t, t->unary(v, b.index(), db));
}

inline Value operator+(const Value& a, const Value& b) {
    return make_node2(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Value operator-(const Value& a, const Value& b) {
    return make_node2(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Value operator*(const Value& a, const Value& b) {
    return make_node2(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Value operator/(const Value& a, const Value& b) {
    const double inv = 1.0 / b.value();
    return make_node2(a.value() * inv, a, inv, b, -a.value() * inv * inv);
}
inline Value operator-(const Value& a) { return make_node1(a.tape(), -a.value(), a, -1.0); }
inline Value operator+(const Value& a) { return a; }

inline Value& operator+=(Value& a, const Value& b) { return a = a + b; }
inline Value& operator-=(Value& a, const Value& b) { return a = a - b; }
inline Value& operator*=(Value& a, const Value& b) { return a = a * b; }
inline Value& operator/=(Value& a, const Value& b) { return a = a / b; }

inline bool operator<(const Value& a, const Value& b) { return a.value() < b.value(); }
inline bool operator>(const Value& a, const Value& b) { return a.value() > b.value(); }
inline bool operator<=(const Value& a, const Value& b) { return a.value() <= b.value(); }
inline bool operator>=(const Value& a, const Value& b) { return a.value() >= b.value(); }

inline Value sin(const Value& a) {
    return make_node1(a.tape(), std::sin(a.value()), a, std::cos(a.value()));
}
inline Value cos(const Value& a) {
    return make_node1(a.tape(), std::cos(a.value()), a, -std::sin(a.value()));
}
inline Value sqrt(const Value& a) {
    const double r = std::sqrt(a.value());
    return make_node1(a.tape(), r, a, 0.5 / r);
}
inline Value exp(const Value& a) {
    const double e = std::exp(a.value());
    return make_node1(a.tape(), e, a, e);
}
inline Value log(const Value& a) {
    return make_node1(a.tape(), std::log(a.value()), a, 1.0 / a.value());
}
inline Value abs(const Value& a) {
    const double s = a.value() > 0.0 ? 1.0 : (a.value() < 0.0 ? -1.0 : 0.0);
    return make_node1(a.tape(), std::abs(a.value()), a, s);
}

// Subgradient at the argmin: the loser contributes nothing to the tape.
inline Value min(const Value& a, const Value& b) { return a.value() <= b.value() ? a : b; }
inline Value max(const Value& a, const Value& b) { return a.value() >= b.value() ? a : b; }

// Gradient of `root` with respect to `inputs` (each must be a tape input).
inline std::vector<double> gradient(const Value& root, std::span<const Value> inputs) {
    std::vector<double> g(inputs.size(), 0.0);
    if (!root.tracked()) return g;  // constant objective: all partials vanish
    const std::vector<double> adj = root.tape()->adjoints(root.index());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        g[i] = adj[static_cast<std::size_t>(inputs[i].index())];
    }
    return g;
}

}  // namespace contactfit::ad

namespace contactfit {

// Overload set shared by double and ad::Value code paths.
using ad::value_of;
using std::abs;
using std::cos;
using std::exp;
using std::log;
using std::max;
using std::min;
using std::sin;
using std::sqrt;

}  // namespace contactfit
