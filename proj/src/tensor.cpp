#include "inrpatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace inrpatch {

int64_t numel(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must be nonempty");
    for (int d : shape) {
        if (d < 1) throw std::invalid_argument("tensor dims must be >= 1, got " + shape_str(shape));
    }
}

Buffer make_buffer(int64_t n, float fill = 0.0f) {
    return std::make_shared<std::vector<float>>(static_cast<size_t>(n), fill);
}

Tape* tape_of(const Tensor& a, const Tensor& b) {
    Tape* t = a.tracked() ? a.tape : (b.tracked() ? b.tape : nullptr);
    if (a.tracked() && b.tracked() && a.tape != b.tape)
        throw std::invalid_argument("operands belong to different tapes");
    return t;
}

// b broadcast as a row vector over a's rows: a [m,n], b [n] or [1,n]
bool row_broadcastable(const Shape& a, const Shape& b) {
    if (a.size() != 2) return false;
    if (b.size() == 1) return b[0] == a[1];
    if (b.size() == 2) return b[0] == 1 && b[1] == a[1];
    return false;
}

// out[i] += A[i,:] . B(row-major m x n), sequential in k per element
void matmul_kernel(const float* A, const float* B, float* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        float* crow = C + static_cast<int64_t>(i) * n;
        const float* arow = A + static_cast<int64_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const float av = arow[kk];
            const float* brow = B + static_cast<int64_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::vector<float> transpose_buf(const float* A, int rows, int cols) {
    std::vector<float> t(static_cast<size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) t[static_cast<size_t>(j) * rows + i] = A[static_cast<size_t>(i) * cols + j];
    return t;
}

float sigmoid_scalar(float x) {
    if (x >= 0.0f) {
        float e = std::exp(-x);
        return 1.0f / (1.0f + e);
    }
    float e = std::exp(x);
    return e / (1.0f + e);
}

float softplus_scalar(float x) {
    if (x > 30.0f) return x;
    if (x < -30.0f) return std::exp(x);
    return std::log1p(std::exp(x));
}

struct ConvDims {
    int B, C, H, W, F, k, s, p, Ho, Wo;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad) {
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d expects 4-d input and weight, got " + shape_str(xs) + " and " + shape_str(ws));
    ConvDims d{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, pad, 0, 0};
    if (ws[1] != d.C)
        throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(xs) + " vs weight " + shape_str(ws));
    if (ws[2] != ws[3]) throw std::invalid_argument("conv2d kernel must be square, got " + shape_str(ws));
    if (stride < 1) throw std::invalid_argument("conv2d stride must be >= 1");
    if (pad < 0) throw std::invalid_argument("conv2d pad must be >= 0");
    int eh = d.H + 2 * pad - d.k;
    int ew = d.W + 2 * pad - d.k;
    if (eh < 0 || ew < 0)
        throw std::invalid_argument("conv2d kernel larger than padded input: " + shape_str(xs) + " vs " + shape_str(ws));
    if (pad == 0 && (eh % stride != 0 || ew % stride != 0))
        throw std::invalid_argument("conv2d without padding requires (H-k) divisible by stride: " +
                                    shape_str(xs) + " kernel " + std::to_string(d.k) + " stride " + std::to_string(stride));
    d.Ho = eh / stride + 1;
    d.Wo = ew / stride + 1;
    return d;
}

} // namespace

float Tensor::scalar() const {
    if (!data || data->size() != 1)
        throw std::invalid_argument("scalar() on tensor of shape " + shape_str(shape));
    return (*data)[0];
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<float>>(*data);
    return t;
}

Tensor zeros(const Shape& shape) {
    check_shape(shape);
    return Tensor(shape, make_buffer(numel(shape)));
}

Tensor full(const Shape& shape, float value) {
    check_shape(shape);
    return Tensor(shape, make_buffer(numel(shape), value));
}

Tensor randn(const Shape& shape, uint64_t seed) {
    Rng rng(seed);
    return randn(shape, rng);
}

Tensor randn(const Shape& shape, Rng& rng) {
    check_shape(shape);
    Tensor t(shape, make_buffer(numel(shape)));
    for (auto& v : *t.data) v = rng.normal();
    return t;
}

Tensor constant(const Shape& shape, std::vector<float> values) {
    check_shape(shape);
    if (static_cast<int64_t>(values.size()) != numel(shape))
        throw std::invalid_argument("constant: " + std::to_string(values.size()) +
                                    " values for shape " + shape_str(shape));
    return Tensor(shape, std::make_shared<std::vector<float>>(std::move(values)));
}

Tensor Tape::leaf(const Tensor& value) {
    Node n;
    n.op = Op::Leaf;
    n.shape = value.shape;
    n.out = value.data;
    Tensor t(value.shape, value.data);
    t.tape = this;
    t.node = append(std::move(n));
    return t;
}

int Tape::append(Node n) {
    if (n.op != Op::Leaf) {
        int64_t ne = numel(n.shape);
        node_live_ += ne;
        counters.live = node_live_;
        counters.peak_live = std::max(counters.peak_live, counters.live);
        switch (scope_) {
            case Scope::GenSynth: counters.fwd_gen += ne; break;
            case Scope::Mapping: counters.fwd_map += ne; break;
            case Scope::Disc: counters.fwd_disc += ne; break;
            case Scope::Other: counters.fwd_other += ne; break;
        }
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::clear() {
    nodes_.clear();
    node_live_ = 0;
    counters.live = 0;
}

void Tape::add_live(int64_t n) {
    counters.live += n;
    counters.peak_live = std::max(counters.peak_live, counters.live);
}

void Tape::sub_live(int64_t n) { counters.live -= n; }

namespace {

Tensor record(Tape* tape, Node n, Buffer out, Shape shape) {
    Tensor t(std::move(shape), std::move(out));
    if (tape) {
        n.shape = t.shape;
        n.out = t.data;
        t.tape = tape;
        t.node = tape->append(std::move(n));
    }
    return t;
}

Tensor unary(const Tensor& a, Op op, float f0, const std::function<float(float)>& fn) {
    Buffer out = make_buffer(a.size());
    const float* src = a.ptr();
    float* dst = out->data();
    for (int64_t i = 0; i < a.size(); ++i) dst[i] = fn(src[i]);
    Node n;
    n.op = op;
    n.in0 = a.node;
    n.a = a.data;
    n.ashape = a.shape;
    n.f0 = f0;
    return record(a.tape, std::move(n), std::move(out), a.shape);
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw std::invalid_argument("matmul shape mismatch: " + shape_str(a.shape) + " x " + shape_str(b.shape));
    int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Buffer out = make_buffer(static_cast<int64_t>(m) * n);
    matmul_kernel(a.ptr(), b.ptr(), out->data(), m, k, n);
    Node nd;
    nd.op = Op::MatMul;
    nd.in0 = a.node;
    nd.in1 = b.node;
    nd.a = a.data;
    nd.b = b.data;
    nd.ashape = a.shape;
    nd.bshape = b.shape;
    return record(tape_of(a, b), std::move(nd), std::move(out), {m, n});
}

namespace {

Tensor add_like(const Tensor& a, const Tensor& b, bool subtract) {
    Op op = subtract ? Op::Sub : Op::Add;
    bool broadcast = false;
    if (a.shape != b.shape) {
        if (!subtract && row_broadcastable(a.shape, b.shape)) {
            broadcast = true;
            op = Op::AddRow;
        } else {
            throw std::invalid_argument((subtract ? std::string("sub") : std::string("add")) +
                                        " shape mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
        }
    }
    Buffer out = make_buffer(a.size());
    const float* pa = a.ptr();
    const float* pb = b.ptr();
    float* dst = out->data();
    if (broadcast) {
        int m = a.shape[0], n = a.shape[1];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) dst[static_cast<int64_t>(i) * n + j] = pa[static_cast<int64_t>(i) * n + j] + pb[j];
    } else {
        for (int64_t i = 0; i < a.size(); ++i) dst[i] = subtract ? pa[i] - pb[i] : pa[i] + pb[i];
    }
    Node n;
    n.op = op;
    n.in0 = a.node;
    n.in1 = b.node;
    n.a = a.data;
    n.b = b.data;
    n.ashape = a.shape;
    n.bshape = b.shape;
    return record(tape_of(a, b), std::move(n), std::move(out), a.shape);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like(a, b, false); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like(a, b, true); }

Tensor mul(const Tensor& a, const Tensor& b) {
    bool broadcast = false;
    if (a.shape != b.shape) {
        if (row_broadcastable(a.shape, b.shape)) {
            broadcast = true;
        } else {
            throw std::invalid_argument("mul shape mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
        }
    }
    Buffer out = make_buffer(a.size());
    const float* pa = a.ptr();
    const float* pb = b.ptr();
    float* dst = out->data();
    if (broadcast) {
        int m = a.shape[0], n = a.shape[1];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) dst[static_cast<int64_t>(i) * n + j] = pa[static_cast<int64_t>(i) * n + j] * pb[j];
    } else {
        for (int64_t i = 0; i < a.size(); ++i) dst[i] = pa[i] * pb[i];
    }
    Node n;
    n.op = broadcast ? Op::MulRow : Op::Mul;
    n.in0 = a.node;
    n.in1 = b.node;
    n.a = a.data;
    n.b = b.data;
    n.ashape = a.shape;
    n.bshape = b.shape;
    return record(tape_of(a, b), std::move(n), std::move(out), a.shape);
}

Tensor scale(const Tensor& a, float s) {
    return unary(a, Op::Scale, s, [s](float x) { return s * x; });
}

Tensor reduce_sum(const Tensor& a) {
    double acc = 0.0;
    const float* p = a.ptr();
    for (int64_t i = 0; i < a.size(); ++i) acc += p[i];
    Node n;
    n.op = Op::Sum;
    n.in0 = a.node;
    n.a = a.data;
    n.ashape = a.shape;
    return record(a.tape, std::move(n), std::make_shared<std::vector<float>>(1, static_cast<float>(acc)), {1});
}

Tensor reduce_mean(const Tensor& a) {
    double acc = 0.0;
    const float* p = a.ptr();
    for (int64_t i = 0; i < a.size(); ++i) acc += p[i];
    Node n;
    n.op = Op::Mean;
    n.in0 = a.node;
    n.a = a.data;
    n.ashape = a.shape;
    float v = static_cast<float>(acc / static_cast<double>(a.size()));
    return record(a.tape, std::move(n), std::make_shared<std::vector<float>>(1, v), {1});
}

Tensor row_sum(const Tensor& a) {
    if (a.shape.size() < 2)
        throw std::invalid_argument("row_sum needs rank >= 2, got " + shape_str(a.shape));
    int d0 = a.shape[0];
    int64_t rest = a.size() / d0;
    Buffer out = make_buffer(d0);
    const float* p = a.ptr();
    for (int i = 0; i < d0; ++i) {
        double acc = 0.0;
        const float* row = p + static_cast<int64_t>(i) * rest;
        for (int64_t j = 0; j < rest; ++j) acc += row[j];
        (*out)[static_cast<size_t>(i)] = static_cast<float>(acc);
    }
    Node n;
    n.op = Op::RowSum;
    n.in0 = a.node;
    n.a = a.data;
    n.ashape = a.shape;
    return record(a.tape, std::move(n), std::move(out), {d0});
}

Tensor leaky_relu(const Tensor& a, float slope) {
    return unary(a, Op::LeakyRelu, slope, [slope](float x) { return x > 0.0f ? x : slope * x; });
}

Tensor sine(const Tensor& a) {
    return unary(a, Op::Sin, 0.0f, [](float x) { return std::sin(x); });
}

Tensor cosine(const Tensor& a) {
    return unary(a, Op::Cos, 0.0f, [](float x) { return std::cos(x); });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, Op::Sigmoid, 0.0f, sigmoid_scalar);
}

Tensor softplus(const Tensor& a) {
    return unary(a, Op::Softplus, 0.0f, softplus_scalar);
}

Tensor safe_sqrt(const Tensor& a) {
    return unary(a, Op::SafeSqrt, 0.0f, [](float x) { return std::sqrt(std::max(x, 0.0f)); });
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    ConvDims d = conv_dims(x.shape, w.shape, stride, pad);
    Buffer out = make_buffer(static_cast<int64_t>(d.B) * d.F * d.Ho * d.Wo);
    const float* px = x.ptr();
    const float* pw = w.ptr();
    float* po = out->data();
    const int64_t xplane = static_cast<int64_t>(d.H) * d.W;
    const int64_t oplane = static_cast<int64_t>(d.Ho) * d.Wo;
    for (int b = 0; b < d.B; ++b) {
        for (int f = 0; f < d.F; ++f) {
            float* oimg = po + (static_cast<int64_t>(b) * d.F + f) * oplane;
            for (int oy = 0; oy < d.Ho; ++oy) {
                for (int ox = 0; ox < d.Wo; ++ox) {
                    float acc = 0.0f;
                    for (int c = 0; c < d.C; ++c) {
                        const float* ximg = px + (static_cast<int64_t>(b) * d.C + c) * xplane;
                        const float* wker = pw + ((static_cast<int64_t>(f) * d.C + c) * d.k) * d.k;
                        for (int ky = 0; ky < d.k; ++ky) {
                            int iy = oy * d.s + ky - d.p;
                            if (iy < 0 || iy >= d.H) continue;
                            for (int kx = 0; kx < d.k; ++kx) {
                                int ix = ox * d.s + kx - d.p;
                                if (ix < 0 || ix >= d.W) continue;
                                acc += ximg[static_cast<int64_t>(iy) * d.W + ix] * wker[ky * d.k + kx];
                            }
                        }
                    }
                    oimg[static_cast<int64_t>(oy) * d.Wo + ox] = acc;
                }
            }
        }
    }
    Node n;
    n.op = Op::Conv2d;
    n.in0 = x.node;
    n.in1 = w.node;
    n.a = x.data;
    n.b = w.data;
    n.ashape = x.shape;
    n.bshape = w.shape;
    n.i0 = stride;
    n.i1 = pad;
    return record(tape_of(x, w), std::move(n), std::move(out), {d.B, d.F, d.Ho, d.Wo});
}

Tensor channel_bias(const Tensor& x, const Tensor& b) {
    if (x.shape.size() != 4 || b.shape.size() != 1 || b.shape[0] != x.shape[1])
        throw std::invalid_argument("channel_bias shape mismatch: " + shape_str(x.shape) + " vs " + shape_str(b.shape));
    int B = x.shape[0], F = x.shape[1];
    int64_t plane = static_cast<int64_t>(x.shape[2]) * x.shape[3];
    Buffer out = make_buffer(x.size());
    const float* px = x.ptr();
    const float* pb = b.ptr();
    float* dst = out->data();
    for (int bi = 0; bi < B; ++bi)
        for (int f = 0; f < F; ++f) {
            const float bias = pb[f];
            const int64_t base = (static_cast<int64_t>(bi) * F + f) * plane;
            for (int64_t i = 0; i < plane; ++i) dst[base + i] = px[base + i] + bias;
        }
    Node n;
    n.op = Op::ChannelBias;
    n.in0 = x.node;
    n.in1 = b.node;
    n.a = x.data;
    n.b = b.data;
    n.ashape = x.shape;
    n.bshape = b.shape;
    return record(tape_of(x, b), std::move(n), std::move(out), x.shape);
}

Tensor avg_pool2(const Tensor& x) {
    if (x.shape.size() != 4 || x.shape[2] % 2 != 0 || x.shape[3] % 2 != 0)
        throw std::invalid_argument("avg_pool2 needs even 4-d input, got " + shape_str(x.shape));
    int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    int Ho = H / 2, Wo = W / 2;
    Buffer out = make_buffer(static_cast<int64_t>(B) * C * Ho * Wo);
    const float* px = x.ptr();
    float* dst = out->data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* img = px + (static_cast<int64_t>(b) * C + c) * H * W;
            float* oimg = dst + (static_cast<int64_t>(b) * C + c) * Ho * Wo;
            for (int i = 0; i < Ho; ++i)
                for (int j = 0; j < Wo; ++j) {
                    const float* r0 = img + static_cast<int64_t>(2 * i) * W + 2 * j;
                    const float* r1 = r0 + W;
                    oimg[static_cast<int64_t>(i) * Wo + j] = 0.25f * (r0[0] + r0[1] + r1[0] + r1[1]);
                }
        }
    Node n;
    n.op = Op::AvgPool2;
    n.in0 = x.node;
    n.a = x.data;
    n.ashape = x.shape;
    return record(x.tape, std::move(n), std::move(out), {B, C, Ho, Wo});
}

Tensor reshape(const Tensor& x, Shape s) {
    check_shape(s);
    if (numel(s) != x.size())
        throw std::invalid_argument("reshape " + shape_str(x.shape) + " -> " + shape_str(s) + " changes element count");
    Buffer out = std::make_shared<std::vector<float>>(*x.data);
    Node n;
    n.op = Op::Reshape;
    n.in0 = x.node;
    n.ashape = x.shape;
    return record(x.tape, std::move(n), std::move(out), std::move(s));
}

Tensor pack_patches(const std::vector<Tensor>& rows, int side) {
    if (rows.empty()) throw std::invalid_argument("pack_patches: empty batch");
    Tape* tape = nullptr;
    for (const auto& r : rows) {
        if (r.shape.size() != 2 || r.shape[0] != side * side || r.shape[1] != 3)
            throw std::invalid_argument("pack_patches expects [side^2,3] rows, got " + shape_str(r.shape));
        if (r.tracked()) {
            if (tape && tape != r.tape) throw std::invalid_argument("pack_patches: mixed tapes");
            tape = r.tape;
        }
    }
    int B = static_cast<int>(rows.size());
    Buffer out = make_buffer(static_cast<int64_t>(B) * 3 * side * side);
    float* dst = out->data();
    const int64_t plane = static_cast<int64_t>(side) * side;
    for (int b = 0; b < B; ++b) {
        const float* src = rows[static_cast<size_t>(b)].ptr();
        for (int c = 0; c < 3; ++c) {
            float* oimg = dst + (static_cast<int64_t>(b) * 3 + c) * plane;
            for (int64_t r = 0; r < plane; ++r) oimg[r] = src[r * 3 + c];
        }
    }
    Node n;
    n.op = Op::Pack;
    n.i0 = side;
    for (const auto& r : rows) n.in_many.push_back(r.node);
    return record(tape, std::move(n), std::move(out), {B, 3, side, side});
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
    int m = parts[0].shape.size() == 2 ? parts[0].shape[0] : -1;
    if (m < 0) throw std::invalid_argument("concat_cols expects rank-2 operands");
    Tape* tape = nullptr;
    int total = 0;
    for (const auto& p : parts) {
        if (p.shape.size() != 2 || p.shape[0] != m)
            throw std::invalid_argument("concat_cols row mismatch: " + shape_str(parts[0].shape) + " vs " + shape_str(p.shape));
        total += p.shape[1];
        if (p.tracked()) {
            if (tape && tape != p.tape) throw std::invalid_argument("concat_cols: mixed tapes");
            tape = p.tape;
        }
    }
    Buffer out = make_buffer(static_cast<int64_t>(m) * total);
    float* dst = out->data();
    int col = 0;
    for (const auto& p : parts) {
        int n = p.shape[1];
        const float* src = p.ptr();
        for (int i = 0; i < m; ++i)
            std::copy(src + static_cast<int64_t>(i) * n, src + static_cast<int64_t>(i + 1) * n,
                      dst + static_cast<int64_t>(i) * total + col);
        col += n;
    }
    Node n;
    n.op = Op::ConcatCols;
    for (const auto& p : parts) {
        n.in_many.push_back(p.node);
        n.many_shapes.push_back(p.shape);
    }
    return record(tape, std::move(n), std::move(out), {m, total});
}

Tensor sq_diff_mean(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw std::invalid_argument("sq_diff_mean shape mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    double acc = 0.0;
    const float* pa = a.ptr();
    const float* pb = b.ptr();
    for (int64_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        acc += d * d;
    }
    Node n;
    n.op = Op::SqDiffMean;
    n.in0 = a.node;
    n.in1 = b.node;
    n.a = a.data;
    n.b = b.data;
    n.ashape = a.shape;
    n.bshape = b.shape;
    float v = static_cast<float>(acc / static_cast<double>(a.size()));
    return record(tape_of(a, b), std::move(n), std::make_shared<std::vector<float>>(1, v), {1});
}

Tensor gather_rows(const Tensor& table, std::vector<int> idx) {
    if (table.shape.size() != 2)
        throw std::invalid_argument("gather_rows expects [N,d] table, got " + shape_str(table.shape));
    int N = table.shape[0], d = table.shape[1];
    for (int i : idx)
        if (i < 0 || i >= N) throw std::invalid_argument("gather_rows index " + std::to_string(i) + " out of [0," + std::to_string(N) + ")");
    int m = static_cast<int>(idx.size());
    Buffer out = make_buffer(static_cast<int64_t>(m) * d);
    const float* src = table.ptr();
    float* dst = out->data();
    for (int r = 0; r < m; ++r)
        std::copy(src + static_cast<int64_t>(idx[static_cast<size_t>(r)]) * d,
                  src + static_cast<int64_t>(idx[static_cast<size_t>(r)] + 1) * d,
                  dst + static_cast<int64_t>(r) * d);
    Node n;
    n.op = Op::Gather;
    n.in0 = table.node;
    n.ashape = table.shape;
    n.idx = std::make_shared<std::vector<int>>(std::move(idx));
    return record(table.tape, std::move(n), std::move(out), {m, d});
}

Tensor Gradients::of(const Tensor& leaf) const {
    if (!leaf.tracked()) throw std::invalid_argument("gradient requested for untracked tensor");
    const Buffer& g = g_[static_cast<size_t>(leaf.node)];
    if (!g) return zeros(leaf.shape);
    Tensor t(leaf.shape, g);
    return t;
}

Gradients backward(Tape& tape, const Tensor& loss) {
    if (numel(loss.shape) != 1)
        throw std::invalid_argument("backward requires a scalar loss, got " + shape_str(loss.shape));
    if (!loss.tracked() || loss.tape != &tape)
        throw std::invalid_argument("backward: loss is not on the tape");

    Gradients grads(tape.size());
    auto& g = grads.raw();
    int64_t grad_floats = 0;
    auto ensure = [&](int id, const Shape& shape) -> std::vector<float>& {
        auto& slot = g[static_cast<size_t>(id)];
        if (!slot) {
            int64_t ne = numel(shape);
            slot = std::make_shared<std::vector<float>>(static_cast<size_t>(ne), 0.0f);
            grad_floats += ne;
            tape.add_live(ne);
        }
        return *slot;
    };

    ensure(loss.node, loss.shape)[0] = 1.0f;

    for (int id = static_cast<int>(tape.size()) - 1; id >= 0; --id) {
        const Buffer& gb = g[static_cast<size_t>(id)];
        if (!gb) continue;
        const Node& nd = tape.node(id);
        const std::vector<float>& go = *gb;
        switch (nd.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                int m = nd.ashape[0], k = nd.ashape[1], n = nd.bshape[1];
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    std::vector<float> bt = transpose_buf(nd.b->data(), k, n);
                    matmul_kernel(go.data(), bt.data(), da.data(), m, n, k);
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    const float* A = nd.a->data();
                    for (int i = 0; i < m; ++i) {
                        const float* arow = A + static_cast<int64_t>(i) * k;
                        const float* grow = go.data() + static_cast<int64_t>(i) * n;
                        for (int kk = 0; kk < k; ++kk) {
                            const float av = arow[kk];
                            float* drow = db.data() + static_cast<int64_t>(kk) * n;
                            for (int j = 0; j < n; ++j) drow[j] += av * grow[j];
                        }
                    }
                }
                break;
            }
            case Op::Add:
            case Op::Sub: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    const float sgn = nd.op == Op::Sub ? -1.0f : 1.0f;
                    for (size_t i = 0; i < go.size(); ++i) db[i] += sgn * go[i];
                }
                break;
            }
            case Op::AddRow: {
                int m = nd.ashape[0], n = nd.ashape[1];
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) db[static_cast<size_t>(j)] += go[static_cast<size_t>(i) * n + j];
                }
                break;
            }
            case Op::Mul: {
                const float* pa = nd.a->data();
                const float* pb = nd.b->data();
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * pb[i];
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    for (size_t i = 0; i < go.size(); ++i) db[i] += go[i] * pa[i];
                }
                break;
            }
            case Op::MulRow: {
                int m = nd.ashape[0], n = nd.ashape[1];
                const float* pa = nd.a->data();
                const float* pb = nd.b->data();
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) da[static_cast<size_t>(i) * n + j] += go[static_cast<size_t>(i) * n + j] * pb[j];
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) db[static_cast<size_t>(j)] += go[static_cast<size_t>(i) * n + j] * pa[static_cast<size_t>(i) * n + j];
                }
                break;
            }
            case Op::Scale: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < go.size(); ++i) da[i] += nd.f0 * go[i];
                }
                break;
            }
            case Op::Sum: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float g0 = go[0];
                    for (auto& v : da) v += g0;
                }
                break;
            }
            case Op::Mean: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float g0 = go[0] / static_cast<float>(da.size());
                    for (auto& v : da) v += g0;
                }
                break;
            }
            case Op::RowSum: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    int d0 = nd.ashape[0];
                    int64_t rest = static_cast<int64_t>(da.size()) / d0;
                    for (int i = 0; i < d0; ++i) {
                        const float g0 = go[static_cast<size_t>(i)];
                        float* row = da.data() + static_cast<int64_t>(i) * rest;
                        for (int64_t j = 0; j < rest; ++j) row[j] += g0;
                    }
                }
                break;
            }
            case Op::LeakyRelu: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float* x = nd.a->data();
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * (x[i] > 0.0f ? 1.0f : nd.f0);
                }
                break;
            }
            case Op::Sin: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float* x = nd.a->data();
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * std::cos(x[i]);
                }
                break;
            }
            case Op::Cos: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float* x = nd.a->data();
                    for (size_t i = 0; i < go.size(); ++i) da[i] -= go[i] * std::sin(x[i]);
                }
                break;
            }
            case Op::Sigmoid: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float* y = nd.out->data();
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * y[i] * (1.0f - y[i]);
                }
                break;
            }
            case Op::Softplus: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float* x = nd.a->data();
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * sigmoid_scalar(x[i]);
                }
                break;
            }
            case Op::SafeSqrt: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    const float* y = nd.out->data();
                    for (size_t i = 0; i < go.size(); ++i)
                        if (y[i] > 0.0f) da[i] += go[i] * 0.5f / y[i];
                }
                break;
            }
            case Op::Conv2d: {
                ConvDims d = conv_dims(nd.ashape, nd.bshape, nd.i0, nd.i1);
                const float* px = nd.a->data();
                const float* pw = nd.b->data();
                const int64_t xplane = static_cast<int64_t>(d.H) * d.W;
                const int64_t oplane = static_cast<int64_t>(d.Ho) * d.Wo;
                float* dx = nd.in0 >= 0 ? ensure(nd.in0, nd.ashape).data() : nullptr;
                float* dw = nd.in1 >= 0 ? ensure(nd.in1, nd.bshape).data() : nullptr;
                for (int b = 0; b < d.B; ++b)
                    for (int f = 0; f < d.F; ++f) {
                        const float* gimg = go.data() + (static_cast<int64_t>(b) * d.F + f) * oplane;
                        for (int oy = 0; oy < d.Ho; ++oy)
                            for (int ox = 0; ox < d.Wo; ++ox) {
                                const float gv = gimg[static_cast<int64_t>(oy) * d.Wo + ox];
                                if (gv == 0.0f) continue;
                                for (int c = 0; c < d.C; ++c) {
                                    const int64_t xbase = (static_cast<int64_t>(b) * d.C + c) * xplane;
                                    const int64_t wbase = (static_cast<int64_t>(f) * d.C + c) * d.k * d.k;
                                    for (int ky = 0; ky < d.k; ++ky) {
                                        int iy = oy * d.s + ky - d.p;
                                        if (iy < 0 || iy >= d.H) continue;
                                        for (int kx = 0; kx < d.k; ++kx) {
                                            int ix = ox * d.s + kx - d.p;
                                            if (ix < 0 || ix >= d.W) continue;
                                            if (dx) dx[xbase + static_cast<int64_t>(iy) * d.W + ix] += gv * pw[wbase + ky * d.k + kx];
                                            if (dw) dw[wbase + ky * d.k + kx] += gv * px[xbase + static_cast<int64_t>(iy) * d.W + ix];
                                        }
                                    }
                                }
                            }
                    }
                break;
            }
            case Op::ChannelBias: {
                int B = nd.ashape[0], F = nd.ashape[1];
                int64_t plane = static_cast<int64_t>(nd.ashape[2]) * nd.ashape[3];
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    for (int bi = 0; bi < B; ++bi)
                        for (int f = 0; f < F; ++f) {
                            const int64_t base = (static_cast<int64_t>(bi) * F + f) * plane;
                            float acc = 0.0f;
                            for (int64_t i = 0; i < plane; ++i) acc += go[static_cast<size_t>(base + i)];
                            db[static_cast<size_t>(f)] += acc;
                        }
                }
                break;
            }
            case Op::AvgPool2: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    int B = nd.ashape[0], C = nd.ashape[1], H = nd.ashape[2], W = nd.ashape[3];
                    int Ho = H / 2, Wo = W / 2;
                    for (int b = 0; b < B; ++b)
                        for (int c = 0; c < C; ++c) {
                            const float* gimg = go.data() + (static_cast<int64_t>(b) * C + c) * Ho * Wo;
                            float* dimg = da.data() + (static_cast<int64_t>(b) * C + c) * H * W;
                            for (int i = 0; i < Ho; ++i)
                                for (int j = 0; j < Wo; ++j) {
                                    const float gq = 0.25f * gimg[static_cast<int64_t>(i) * Wo + j];
                                    dimg[static_cast<int64_t>(2 * i) * W + 2 * j] += gq;
                                    dimg[static_cast<int64_t>(2 * i) * W + 2 * j + 1] += gq;
                                    dimg[static_cast<int64_t>(2 * i + 1) * W + 2 * j] += gq;
                                    dimg[static_cast<int64_t>(2 * i + 1) * W + 2 * j + 1] += gq;
                                }
                        }
                }
                break;
            }
            case Op::Reshape: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
                }
                break;
            }
            case Op::Pack: {
                int side = nd.i0;
                const int64_t plane = static_cast<int64_t>(side) * side;
                for (size_t bi = 0; bi < nd.in_many.size(); ++bi) {
                    int in = nd.in_many[bi];
                    if (in < 0) continue;
                    auto& da = ensure(in, {side * side, 3});
                    for (int c = 0; c < 3; ++c) {
                        const float* gimg = go.data() + (static_cast<int64_t>(bi) * 3 + c) * plane;
                        for (int64_t r = 0; r < plane; ++r) da[static_cast<size_t>(r * 3 + c)] += gimg[r];
                    }
                }
                break;
            }
            case Op::ConcatCols: {
                int total = nd.shape[1];
                int m = nd.shape[0];
                int col = 0;
                for (size_t pi = 0; pi < nd.in_many.size(); ++pi) {
                    int n = nd.many_shapes[pi][1];
                    int in = nd.in_many[pi];
                    if (in >= 0) {
                        auto& da = ensure(in, nd.many_shapes[pi]);
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n; ++j)
                                da[static_cast<size_t>(i) * n + j] += go[static_cast<size_t>(i) * total + col + j];
                    }
                    col += n;
                }
                break;
            }
            case Op::SqDiffMean: {
                const float* pa = nd.a->data();
                const float* pb = nd.b->data();
                const float g0 = go[0] * 2.0f / static_cast<float>(nd.a->size());
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    for (size_t i = 0; i < da.size(); ++i) da[i] += g0 * (pa[i] - pb[i]);
                }
                if (nd.in1 >= 0) {
                    auto& db = ensure(nd.in1, nd.bshape);
                    for (size_t i = 0; i < db.size(); ++i) db[i] -= g0 * (pa[i] - pb[i]);
                }
                break;
            }
            case Op::Gather: {
                if (nd.in0 >= 0) {
                    auto& da = ensure(nd.in0, nd.ashape);
                    int dcols = nd.ashape[1];
                    const auto& idx = *nd.idx;
                    for (size_t r = 0; r < idx.size(); ++r) {
                        float* drow = da.data() + static_cast<int64_t>(idx[r]) * dcols;
                        const float* grow = go.data() + static_cast<int64_t>(r) * dcols;
                        for (int j = 0; j < dcols; ++j) drow[j] += grow[j];
                    }
                }
                break;
            }
        }
    }
    tape.sub_live(grad_floats);
    return grads;
}

void adam_step(std::vector<std::pair<std::string, Tensor*>> params,
               const std::map<std::string, Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: param/grad key sets differ in size");
    state.step += 1;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) throw std::invalid_argument("adam_step: missing gradient for " + name);
        const Tensor& grad = it->second;
        if (grad.shape != p->shape)
            throw std::invalid_argument("adam_step: shape mismatch for " + name + ": " +
                                        shape_str(p->shape) + " vs " + shape_str(grad.shape));
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(static_cast<size_t>(p->size()), 0.0f);
        if (v.empty()) v.assign(static_cast<size_t>(p->size()), 0.0f);
        float* pv = p->ptr();
        const float* g = grad.ptr();
        for (int64_t i = 0; i < p->size(); ++i) {
            m[static_cast<size_t>(i)] = static_cast<float>(b1) * m[static_cast<size_t>(i)] + (1.0f - static_cast<float>(b1)) * g[i];
            v[static_cast<size_t>(i)] = static_cast<float>(b2) * v[static_cast<size_t>(i)] + (1.0f - static_cast<float>(b2)) * g[i] * g[i];
            const float mhat = static_cast<float>(m[static_cast<size_t>(i)] / c1);
            const float vhat = static_cast<float>(v[static_cast<size_t>(i)] / c2);
            pv[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
        }
    }
}

} // namespace inrpatch
