#include <doctest.h>

#include <cmath>

#include "inrpatch/tensor.hpp"
#include "oracle.hpp"

using namespace inrpatch;
using namespace inrpatch::testing;

TEST_CASE("zeros and constant basics") {
    Tensor z = zeros({2, 2});
    for (float v : *z.data) CHECK(v == 0.0f);
    Tensor c = constant({3}, {1.0f, 2.0f, 3.0f});
    CHECK((*c.data)[2] == 3.0f);
    CHECK_THROWS(constant({2}, {1.0f}));
}

TEST_CASE("matmul identity and shape errors") {
    Tensor eye = constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Rng rng(5);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor y = matmul(eye, x);
    for (int64_t i = 0; i < x.size(); ++i) CHECK((*y.data)[i] == doctest::Approx((*x.data)[i]));
    bool threw = false;
    try {
        matmul(x, x);
    } catch (const std::invalid_argument& e) {
        threw = true;
        CHECK(std::string(e.what()).find("[3x4]") != std::string::npos); // names both shapes
    }
    CHECK(threw);
}

TEST_CASE("sq_diff_mean of identical tensors is zero") {
    Rng rng(3);
    Tensor a = random_tensor({5, 5}, rng);
    CHECK(sq_diff_mean(a, a).scalar() == 0.0f);
}

TEST_CASE("conv2d against a direct window-sum oracle") {
    // 4x4 ramp, all-ones 2x2 kernel, stride 2: each output is its window sum
    std::vector<float> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<size_t>(i)] = static_cast<float>(i);
    Tensor x = constant({1, 1, 4, 4}, ramp);
    Tensor w = constant({1, 1, 2, 2}, {1, 1, 1, 1});
    Tensor y = conv2d(x, w, 2);
    REQUIRE(y.shape == Shape{1, 1, 2, 2});
    for (int oy = 0; oy < 2; ++oy)
        for (int ox = 0; ox < 2; ++ox) {
            float expect = 0.0f;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) expect += ramp[static_cast<size_t>((2 * oy + dy) * 4 + 2 * ox + dx)];
            CHECK((*y.data)[static_cast<size_t>(oy * 2 + ox)] == doctest::Approx(expect));
        }
}

TEST_CASE("conv2d rejects non-exact tiling without padding") {
    Tensor x = zeros({1, 1, 5, 5});
    Tensor w = zeros({1, 1, 2, 2});
    CHECK_THROWS(conv2d(x, w, 2, 0));
    CHECK_NOTHROW(conv2d(zeros({1, 1, 4, 4}), w, 2, 0));
}

TEST_CASE("backward: d/dx sum(x^2) and sin'(0)") {
    Tape tape;
    Tensor x = tape.leaf(constant({3}, {1, 2, 3}));
    Tensor loss = reduce_sum(mul(x, x));
    Gradients g = backward(tape, loss);
    Tensor gx = g.of(x);
    CHECK((*gx.data)[0] == doctest::Approx(2.0f));
    CHECK((*gx.data)[1] == doctest::Approx(4.0f));
    CHECK((*gx.data)[2] == doctest::Approx(6.0f));

    Tape t2;
    Tensor x0 = t2.leaf(zeros({1}));
    Gradients g2 = backward(t2, reduce_sum(sine(x0)));
    CHECK((*g2.of(x0).data)[0] == doctest::Approx(1.0f));
}

TEST_CASE("backward requires a scalar loss on the tape") {
    Tape tape;
    Tensor x = tape.leaf(constant({2}, {1, 2}));
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(backward(tape, y), std::invalid_argument);
    CHECK_THROWS_AS(backward(tape, constant({1}, {0.0f})), std::invalid_argument);
}

TEST_CASE("unreached leaves get zero gradients") {
    Tape tape;
    Tensor x = tape.leaf(constant({2}, {1, 2}));
    Tensor y = tape.leaf(constant({2}, {3, 4}));
    Gradients g = backward(tape, reduce_sum(x));
    Tensor gy = g.of(y);
    CHECK((*gy.data)[0] == 0.0f);
    CHECK((*gy.data)[1] == 0.0f);
}

namespace {

// builds loss = sum(op_out * r) for a random projection r and grad-checks
// every tracked input of `make`
void op_gradient_case(const char* name,
                      const std::function<Tensor(const std::vector<Tensor>&)>& make,
                      std::vector<Tensor> inputs, uint64_t seed) {
    CAPTURE(name);
    Rng rng(seed);
    Tensor probe; // fixed random projection, shaped on first run
    for (size_t target = 0; target < inputs.size(); ++target) {
        Tape tape;
        std::vector<Tensor> tracked = inputs;
        tracked[target] = tape.leaf(inputs[target]);
        Tensor out = make(tracked);
        if (!probe.data) probe = random_tensor(out.shape, rng);
        Tensor loss = reduce_sum(mul(out, probe));
        Gradients g = backward(tape, loss);
        Tensor grad = g.of(tracked[target]);
        auto eval = [&]() -> double {
            Tensor o = make(inputs); // untracked forward on the mutated buffer
            double acc = 0.0;
            for (int64_t i = 0; i < o.size(); ++i)
                acc += static_cast<double>((*o.data)[i]) * (*probe.data)[static_cast<size_t>(i)];
            return acc;
        };
        GradCheckResult res = check_gradient(eval, inputs[target], grad, rng);
        CAPTURE(target);
        CHECK_MESSAGE(res.ok(), name, " input ", target, " worst scaled err ", res.worst);
    }
}

} // namespace

TEST_CASE("per-op gradients match central finite differences") {
    Rng rng(11);

    Tensor a23 = random_tensor({2, 3}, rng);
    Tensor b34 = random_tensor({3, 4}, rng);
    op_gradient_case("matmul", [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                     {a23, b34}, 101);

    Tensor x = random_tensor({3, 4}, rng);
    Tensor y = random_tensor({3, 4}, rng);
    Tensor row = random_tensor({4}, rng);
    op_gradient_case("add", [](const std::vector<Tensor>& in) { return add(in[0], in[1]); }, {x, y}, 102);
    op_gradient_case("add_row", [](const std::vector<Tensor>& in) { return add(in[0], in[1]); }, {x, row}, 103);
    op_gradient_case("sub", [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); }, {x, y}, 104);
    op_gradient_case("mul", [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); }, {x, y}, 105);
    op_gradient_case("mul_row", [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); }, {x, row}, 106);
    op_gradient_case("scale", [](const std::vector<Tensor>& in) { return scale(in[0], -1.7f); }, {x}, 107);
    op_gradient_case("sum", [](const std::vector<Tensor>& in) { return reduce_sum(in[0]); }, {x}, 108);
    op_gradient_case("mean", [](const std::vector<Tensor>& in) { return reduce_mean(in[0]); }, {x}, 109);
    op_gradient_case("row_sum", [](const std::vector<Tensor>& in) { return row_sum(in[0]); }, {x}, 110);

    Tensor xk = random_tensor({3, 4}, rng);
    nudge_from_zero(xk);
    op_gradient_case("leaky_relu", [](const std::vector<Tensor>& in) { return leaky_relu(in[0], 0.2f); }, {xk}, 111);
    op_gradient_case("sine", [](const std::vector<Tensor>& in) { return sine(in[0]); }, {x}, 112);
    op_gradient_case("cosine", [](const std::vector<Tensor>& in) { return cosine(in[0]); }, {x}, 113);
    op_gradient_case("sigmoid", [](const std::vector<Tensor>& in) { return sigmoid(in[0]); }, {x}, 114);
    op_gradient_case("softplus", [](const std::vector<Tensor>& in) { return softplus(in[0]); }, {x}, 115);

    Tensor pos = random_tensor({6}, rng);
    for (auto& v : *pos.data) v = 0.5f + std::fabs(v); // away from sqrt's origin
    op_gradient_case("safe_sqrt", [](const std::vector<Tensor>& in) { return safe_sqrt(in[0]); }, {pos}, 116);

    Tensor img = random_tensor({2, 3, 6, 6}, rng, 0.5f);
    Tensor ker = random_tensor({4, 3, 3, 3}, rng, 0.3f);
    op_gradient_case("conv2d", [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], 2, 1); },
                     {img, ker}, 117);
    Tensor cb = random_tensor({3}, rng);
    op_gradient_case("channel_bias", [](const std::vector<Tensor>& in) { return channel_bias(in[0], in[1]); },
                     {img, cb}, 118);
    op_gradient_case("avg_pool2", [](const std::vector<Tensor>& in) { return avg_pool2(in[0]); }, {img}, 119);
    op_gradient_case("reshape", [](const std::vector<Tensor>& in) { return reshape(in[0], {6, 2}); }, {x}, 120);

    Tensor p0 = random_tensor({4, 3}, rng);
    Tensor p1 = random_tensor({4, 3}, rng);
    op_gradient_case("pack_patches",
                     [](const std::vector<Tensor>& in) { return pack_patches({in[0], in[1]}, 2); }, {p0, p1}, 121);
    Tensor c0 = random_tensor({3, 2}, rng);
    Tensor c1 = random_tensor({3, 5}, rng);
    op_gradient_case("concat_cols",
                     [](const std::vector<Tensor>& in) { return concat_cols({in[0], in[1]}); }, {c0, c1}, 122);
    op_gradient_case("sq_diff_mean",
                     [](const std::vector<Tensor>& in) { return sq_diff_mean(in[0], in[1]); }, {x, y}, 123);

    Tensor table = random_tensor({5, 3}, rng);
    op_gradient_case("gather_rows",
                     [](const std::vector<Tensor>& in) { return gather_rows(in[0], {0, 2, 2, 4}); }, {table}, 124);
}

TEST_CASE("two-layer leaky-relu MLP gradient vs finite differences") {
    Rng rng(21);
    Tensor x = random_tensor({4, 5}, rng);
    Tensor w1 = random_tensor({5, 6}, rng, 0.5f);
    Tensor b1 = random_tensor({6}, rng, 0.1f);
    Tensor w2 = random_tensor({6, 2}, rng, 0.5f);
    Tensor b2 = random_tensor({2}, rng, 0.1f);
    auto forward = [&](Tensor tw1, Tensor tb1, Tensor tw2, Tensor tb2) {
        Tensor h = leaky_relu(add(matmul(x, tw1), tb1), 0.2f);
        Tensor out = add(matmul(h, tw2), tb2);
        return reduce_mean(mul(out, out));
    };
    std::vector<Tensor*> params{&w1, &b1, &w2, &b2};
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tape tape;
        Tensor tw1 = pi == 0 ? tape.leaf(w1) : w1;
        Tensor tb1 = pi == 1 ? tape.leaf(b1) : b1;
        Tensor tw2 = pi == 2 ? tape.leaf(w2) : w2;
        Tensor tb2 = pi == 3 ? tape.leaf(b2) : b2;
        Tensor loss = forward(tw1, tb1, tw2, tb2);
        Gradients g = backward(tape, loss);
        Tensor grad = g.of(pi == 0 ? tw1 : pi == 1 ? tb1 : pi == 2 ? tw2 : tb2);
        auto eval = [&]() { return static_cast<double>(forward(w1, b1, w2, b2).scalar()); };
        GradCheckResult res = check_gradient(eval, *params[pi], grad, rng);
        CHECK_MESSAGE(res.ok(), "mlp param ", pi, " worst scaled err ", res.worst);
    }
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(31);
    Tensor xv = random_tensor({3, 3}, rng);
    const float alpha = 0.7f, beta = -1.3f;

    auto grads_of = [&](bool combined) {
        Tape tape;
        Tensor x = tape.leaf(xv);
        Tensor l1 = reduce_mean(mul(x, x));
        Tensor l2 = reduce_sum(sine(x));
        Tensor loss = combined ? add(scale(l1, alpha), scale(l2, beta)) : Tensor{};
        if (combined) {
            return std::vector<float>(*backward(tape, loss).of(x).data);
        }
        Gradients g1 = backward(tape, l1);
        std::vector<float> out(*g1.of(x).data);
        Gradients g2 = backward(tape, l2);
        const std::vector<float>& o2 = *g2.of(x).data;
        for (size_t i = 0; i < out.size(); ++i) out[i] = alpha * out[i] + beta * o2[i];
        return out;
    };
    std::vector<float> combined = grads_of(true);
    std::vector<float> separate = grads_of(false);
    for (size_t i = 0; i < combined.size(); ++i)
        CHECK(std::fabs(combined[i] - separate[i]) < 1e-5f);
}

TEST_CASE("replaying a seeded forward/backward is bitwise identical") {
    auto run = [] {
        Rng rng(77);
        Tape tape;
        Tensor x = tape.leaf(random_tensor({4, 4}, rng));
        Tensor w = tape.leaf(random_tensor({4, 2}, rng));
        Tensor loss = reduce_mean(sigmoid(matmul(leaky_relu(x, 0.2f), w)));
        Gradients g = backward(tape, loss);
        std::vector<float> out{loss.scalar()};
        const auto& gw = *g.of(w).data;
        out.insert(out.end(), gw.begin(), gw.end());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    Tensor p = constant({3}, {1, 2, 3});
    std::vector<float> before(*p.data);
    AdamState st{AdamConfig{0.1f, 0.0f, 0.99f, 1e-8f}};
    adam_step({{"p", &p}}, {{"p", zeros({3})}}, st);
    CHECK(*p.data == before);
    CHECK(st.step == 1);
}

TEST_CASE("adam: first step moves by ~lr against a unit gradient") {
    Tensor p = zeros({1});
    AdamState st{AdamConfig{0.1f, 0.0f, 0.99f, 1e-8f}};
    adam_step({{"p", &p}}, {{"p", constant({1}, {1.0f})}}, st);
    CHECK(std::fabs((*p.data)[0] + 0.1f) < 1e-6f);
}

TEST_CASE("adam is a pure function of params, grads and state") {
    auto run = [] {
        Tensor p = constant({4}, {0.5f, -1.0f, 2.0f, 0.1f});
        AdamState st{AdamConfig{}};
        Tensor g = constant({4}, {0.3f, -0.2f, 0.05f, 1.5f});
        adam_step({{"p", &p}}, {{"p", g}}, st);
        adam_step({{"p", &p}}, {{"p", g}}, st);
        return std::vector<float>(*p.data);
    };
    CHECK(run() == run());
}

TEST_CASE("adam rejects mismatched shapes and missing keys") {
    Tensor p = zeros({2});
    AdamState st{AdamConfig{}};
    CHECK_THROWS_AS(adam_step({{"p", &p}}, {{"p", zeros({3})}}, st), std::invalid_argument);
    CHECK_THROWS_AS(adam_step({{"p", &p}}, {{"q", zeros({2})}}, st), std::invalid_argument);
}

TEST_CASE("forward ops keep finite inputs finite") {
    Rng rng(41);
    Tensor x = random_tensor({8, 8}, rng, 3.0f);
    for (Tensor t : {softplus(x), sigmoid(x), sine(x), leaky_relu(x, 0.2f)})
        for (float v : *t.data) CHECK(std::isfinite(v));
}
