#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "icode_lab/nn.hpp"
#include "icode_lab/rng.hpp"

using namespace icode_lab;

namespace {

Mlp random_net(std::size_t in, std::size_t out, std::size_t width, std::size_t hidden, bool bias,
               std::uint64_t seed) {
    Rng rng(seed, stream::weights);
    return make_mlp(in, out, width, hidden, bias, rng);
}

double loss_of(const Mlp& net, const Vec& x, const Vec& cot) {
    const Vec y = mlp_forward(net, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += cot[i] * y[i];
    return s;
}

}  // namespace

TEST_CASE("softplus and sigmoid primitives") {
    CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(softplus(-20.0) == Catch::Approx(2.061153620314381e-09).epsilon(1e-12));
    CHECK(softplus(20.0) == Catch::Approx(20.0 + 2.061153620314381e-09).epsilon(1e-15));
    CHECK(softplus(700.0) == 700.0);  // no overflow in the linear tail
    CHECK(std::isfinite(softplus(-745.0)));
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(40.0) == Catch::Approx(1.0).margin(1e-15));
    for (double x : {-3.0, -0.7, 0.0, 1.3, 9.0}) {
        const double h = 1e-6;
        const double fd = (softplus(x + h) - softplus(x - h)) / (2 * h);
        CHECK(sigmoid(x) == Catch::Approx(fd).margin(1e-8));
    }
}

TEST_CASE("forward pass on a hand-built identity-weight net") {
    Mlp net;
    net.layers.push_back({Matrix::identity(2), Vec{0.0, 0.0}});
    Matrix w2(1, 2);
    w2(0, 0) = 1.0;
    w2(0, 1) = 1.0;
    net.layers.push_back({w2, Vec{0.0}});
    net.validate();
    const Vec y = mlp_forward(net, Vec{0.0, 0.0});
    REQUIRE(y.size() == 1);
    CHECK(y[0] == Catch::Approx(1.3862943611198906).epsilon(1e-15));  // 2 log 2
    const Vec y2 = mlp_forward(net, Vec{30.0, -30.0});
    CHECK(y2[0] == Catch::Approx(30.0).margin(1e-8));
}

TEST_CASE("vjp matches central finite differences") {
    const struct {
        std::size_t in, out, width, hidden;
        bool bias;
    } shapes[] = {{2, 3, 8, 2, true}, {4, 1, 6, 1, false}, {1, 1, 5, 3, true}, {3, 3, 7, 2, true}};
    std::uint64_t seed = 11;
    for (const auto& s : shapes) {
        Mlp net = random_net(s.in, s.out, s.width, s.hidden, s.bias, seed++);
        Rng data_rng(seed * 977, stream::scan);
        Vec x(s.in), cot(s.out);
        for (auto& v : x) v = data_rng.uniform(-1.5, 1.5);
        for (auto& v : cot) v = data_rng.uniform(-1.0, 1.0);

        MlpGrad grads = MlpGrad::zeros_like(net);
        Vec x_cot;
        MlpWorkspace ws;
        mlp_vjp_acc(net, x, cot, grads, x_cot, ws);

        const double h = 1e-5;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& w = net.layers[l].w;
            for (std::size_t k = 0; k < w.data.size(); k += std::max<std::size_t>(1, w.data.size() / 7)) {
                const double keep = w.data[k];
                w.data[k] = keep + h;
                const double up = loss_of(net, x, cot);
                w.data[k] = keep - h;
                const double dn = loss_of(net, x, cot);
                w.data[k] = keep;
                const double fd = (up - dn) / (2 * h);
                CHECK_THAT(grads.layers[l].w.data[k],
                           Catch::Matchers::WithinRel(fd, 1e-4) || Catch::Matchers::WithinAbs(fd, 1e-8));
            }
            auto& b = net.layers[l].b;
            for (std::size_t k = 0; k < b.size(); k += 3) {
                const double keep = b[k];
                b[k] = keep + h;
                const double up = loss_of(net, x, cot);
                b[k] = keep - h;
                const double dn = loss_of(net, x, cot);
                b[k] = keep;
                const double fd = (up - dn) / (2 * h);
                CHECK_THAT(grads.layers[l].b[k],
                           Catch::Matchers::WithinRel(fd, 1e-4) || Catch::Matchers::WithinAbs(fd, 1e-8));
            }
        }
        for (std::size_t k = 0; k < s.in; ++k) {
            Vec xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd = (loss_of(net, xp, cot) - loss_of(net, xm, cot)) / (2 * h);
            CHECK_THAT(x_cot[k],
                       Catch::Matchers::WithinRel(fd, 1e-4) || Catch::Matchers::WithinAbs(fd, 1e-8));
        }
    }
}

TEST_CASE("input jacobian rows are bitwise identical to basis vjps") {
    Mlp net = random_net(3, 4, 9, 2, true, 99);
    Rng rng(5, stream::scan);
    Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Matrix J = mlp_input_jacobian(net, x);
    REQUIRE(J.rows == 4);
    REQUIRE(J.cols == 3);
    for (std::size_t i = 0; i < 4; ++i) {
        Vec cot(4, 0.0);
        cot[i] = 1.0;
        const auto [grads, x_cot] = mlp_vjp(net, x, cot);
        for (std::size_t k = 0; k < 3; ++k) CHECK(J(i, k) == x_cot[k]);
    }
}

TEST_CASE("initialization ranges and determinism") {
    Rng r1(42, stream::weights);
    Mlp a = make_mlp(3, 2, 16, 2, true, r1);
    Rng r2(42, stream::weights);
    Mlp b = make_mlp(3, 2, 16, 2, true, r2);
    Rng r3(43, stream::weights);
    Mlp c = make_mlp(3, 2, 16, 2, true, r3);
    bool identical = true, differs = false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const double bound = std::sqrt(1.0 / static_cast<double>(a.layers[l].w.cols));
        for (std::size_t k = 0; k < a.layers[l].w.data.size(); ++k) {
            CHECK(std::abs(a.layers[l].w.data[k]) <= bound);
            identical = identical && a.layers[l].w.data[k] == b.layers[l].w.data[k];
            differs = differs || a.layers[l].w.data[k] != c.layers[l].w.data[k];
        }
        for (double bias : a.layers[l].b) CHECK(bias == 0.0);
    }
    CHECK(identical);
    CHECK(differs);
    CHECK(a.param_count() == (16 * 3 + 16) + (16 * 16 + 16) + (2 * 16 + 2));
}

TEST_CASE("adam single step and 100-step quadratic descent") {
    // one parameter, constant gradient 1: first step is lr / (1 + eps)
    Mlp net;
    Matrix w(1, 1);
    w(0, 0) = 0.0;
    net.layers.push_back({w, {}});
    AdamState st = AdamState::init(net, AdamParams{0.1, 0.9, 0.999, 1e-8});
    MlpGrad g = MlpGrad::zeros_like(net);
    g.layers[0].w(0, 0) = 1.0;
    adam_step(st, net, g);
    CHECK(net.layers[0].w(0, 0) == Catch::Approx(-0.09999999900000002).epsilon(1e-14));

    // minimize (w-3)^2 from 0
    net.layers[0].w(0, 0) = 0.0;
    st = AdamState::init(net, AdamParams{0.1, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 100; ++i) {
        g.layers[0].w(0, 0) = 2.0 * (net.layers[0].w(0, 0) - 3.0);
        adam_step(st, net, g);
    }
    CHECK(net.layers[0].w(0, 0) == Catch::Approx(2.9806554375278127).epsilon(1e-12));
}

TEST_CASE("json round trip preserves every weight exactly") {
    Mlp net = random_net(2, 3, 11, 3, true, 7);
    const nlohmann::json j = mlp_to_json(net);
    const Mlp back = mlp_from_json(j);
    REQUIRE(back.layers.size() == net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(back.layers[l].w.data == net.layers[l].w.data);
        CHECK(back.layers[l].b == net.layers[l].b);
    }
    // and through a serialized string as the CLI does
    const Mlp back2 = mlp_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back2.layers[1].w.data == net.layers[1].w.data);

    nlohmann::json bad = j;
    bad["activation"] = "relu";
    CHECK_THROWS(mlp_from_json(bad));
}
