#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "inrpatch/rng.hpp"

namespace inrpatch {

using Shape = std::vector<int>;
using Buffer = std::shared_ptr<std::vector<float>>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

// Dense float32 tensor. Plain value unless it carries a tape node, in which
// case it participates in reverse-mode differentiation. Buffers are shared
// and treated as immutable while a tape referencing them is alive; only the
// optimizer mutates parameter buffers, between tapes.
struct Tensor {
    Shape shape;
    Buffer data;
    Tape* tape = nullptr;
    int node = -1;

    Tensor() = default;
    Tensor(Shape s, Buffer d) : shape(std::move(s)), data(std::move(d)) {}

    int64_t size() const { return data ? static_cast<int64_t>(data->size()) : 0; }
    bool tracked() const { return node >= 0; }
    float scalar() const;
    Tensor clone() const; // deep copy, untracked

    float* ptr() { return data->data(); }
    const float* ptr() const { return data->data(); }
};

Tensor zeros(const Shape& shape);
Tensor full(const Shape& shape, float value);
Tensor randn(const Shape& shape, uint64_t seed);
Tensor randn(const Shape& shape, Rng& rng);
Tensor constant(const Shape& shape, std::vector<float> values);

// Attribution of forward activations, for the cost accounting.
enum class Scope : uint8_t { Other = 0, GenSynth, Mapping, Disc };

struct TapeCounters {
    int64_t fwd_gen = 0;   // per-pixel generator synthesis activations
    int64_t fwd_map = 0;   // mapping network / per-sample style activations
    int64_t fwd_disc = 0;  // discriminator activations
    int64_t fwd_other = 0; // loss arithmetic etc., excluded from fwd_total
    int64_t live = 0;      // currently live floats (node outputs + grad buffers)
    int64_t peak_live = 0;

    // "generator + discriminator forward" activations
    int64_t fwd_total() const { return fwd_gen + fwd_map + fwd_disc; }
    void reset() { fwd_gen = fwd_map = fwd_disc = fwd_other = 0; peak_live = live; }
};

enum class Op : uint8_t {
    Leaf, MatMul, Add, AddRow, Sub, Mul, MulRow, Scale, Sum, Mean, RowSum,
    LeakyRelu, Sin, Cos, Sigmoid, Softplus, SafeSqrt, Conv2d, ChannelBias,
    AvgPool2, Reshape, Pack, ConcatCols, SqDiffMean, Gather
};

struct Node {
    Op op = Op::Leaf;
    Shape shape;          // output shape
    Buffer out;           // saved output values
    int in0 = -1, in1 = -1;
    Buffer a, b;          // saved input values
    Shape ashape, bshape;
    std::vector<int> in_many;        // Pack / ConcatCols
    std::vector<Shape> many_shapes;  // shapes of in_many operands
    std::shared_ptr<std::vector<int>> idx; // Gather row indices
    float f0 = 0.0f;      // slope / scale factor
    int i0 = 0, i1 = 0;   // stride / pad / side, op dependent
};

// Append-only op record for one forward pass. Single-threaded by contract:
// one logical training thread owns the tape.
class Tape {
public:
    Tensor leaf(const Tensor& value); // differentiable leaf sharing the buffer
    int append(Node n);
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    size_t size() const { return nodes_.size(); }
    void clear();

    Scope scope() const { return scope_; }
    void set_scope(Scope s) { scope_ = s; }

    TapeCounters counters;

    // internal, used by backward() for grad-buffer accounting
    void add_live(int64_t n);
    void sub_live(int64_t n);

private:
    std::vector<Node> nodes_;
    int64_t node_live_ = 0;
    Scope scope_ = Scope::Other;
};

struct ScopeGuard {
    Tape* tape;
    Scope prev = Scope::Other;
    ScopeGuard(Tape* t, Scope s) : tape(t) {
        if (tape) { prev = tape->scope(); tape->set_scope(s); }
    }
    ~ScopeGuard() {
        if (tape) tape->set_scope(prev);
    }
};

// Forward ops. Each appends one tape record when any input is tracked;
// with untracked inputs they are plain eager kernels.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);   // equal shapes, or b a row vector
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);   // equal shapes, or b a row vector
Tensor scale(const Tensor& a, float s);
Tensor reduce_sum(const Tensor& a);             // -> [1]
Tensor reduce_mean(const Tensor& a);            // -> [1]
Tensor row_sum(const Tensor& a);                // [d0, ...] -> [d0]
Tensor leaky_relu(const Tensor& a, float slope);
Tensor sine(const Tensor& a);
Tensor cosine(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor safe_sqrt(const Tensor& a);              // grad defined as 0 at 0
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad = 0);
Tensor channel_bias(const Tensor& x, const Tensor& b); // [B,F,h,w] + [F]
Tensor avg_pool2(const Tensor& x);              // [B,C,H,W] -> [B,C,H/2,W/2]
Tensor reshape(const Tensor& x, Shape s);
Tensor pack_patches(const std::vector<Tensor>& rows, int side); // B x [side^2,3] -> [B,3,side,side]
Tensor concat_cols(const std::vector<Tensor>& parts);           // [m,n_i] -> [m, sum n_i]
Tensor sq_diff_mean(const Tensor& a, const Tensor& b);          // -> [1]
Tensor gather_rows(const Tensor& table, std::vector<int> idx);  // [N,d] -> [len(idx),d]

// Gradients keyed by tape node id; leaves never touched by the loss read as
// zeros of the leaf shape.
class Gradients {
public:
    explicit Gradients(size_t n) : g_(n) {}
    Tensor of(const Tensor& leaf) const;
    std::vector<Buffer>& raw() { return g_; }
    const std::vector<Buffer>& raw() const { return g_; }

private:
    std::vector<Buffer> g_;
};

Gradients backward(Tape& tape, const Tensor& loss);

struct AdamConfig {
    float lr = 2e-3f;
    float beta1 = 0.0f;
    float beta2 = 0.99f;
    float eps = 1e-8f;
};

struct AdamState {
    AdamConfig cfg;
    int64_t step = 0;
    std::map<std::string, std::vector<float>> m, v;
};

// Bias-corrected Adam over named parameters. Key sets of params and grads
// must match exactly; grads shaped like their parameters.
void adam_step(std::vector<std::pair<std::string, Tensor*>> params,
               const std::map<std::string, Tensor>& grads, AdamState& state);

} // namespace inrpatch
