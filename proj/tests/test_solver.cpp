#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.h"
#include "iie/core/gradcheck.h"
#include "iie/core/ops.h"
#include "iie/solver/integrators.h"
#include "iie/solver/scalar_ivp.h"

using namespace iie;
using namespace iie::test;
using Td = Tensor<double>;

namespace {

// block function wrapper that counts evaluations
struct CountingFn {
    BlockFn<double> fn;
    mutable int calls = 0;
    BlockFn<double> counted() {
        return [this](const Td& y) {
            ++calls;
            return fn(y);
        };
    }
};

}  // namespace

TEST_CASE("euler_step: zero field, scalar decay, identity field") {
    BlockFn<double> zero = [](const Td& y) { return Td::zeros(y.shape()); };
    Td y = Td::from_vec({3}, {1, -2, 5});
    CHECK(euler_step(zero, y).vec() == y.vec());

    BlockFn<double> decay = [](const Td& y) { return scale(y, 0.25 * -2.0); };
    CHECK(euler_step(decay, Td::scalar(1.0)).item() == doctest::Approx(0.5).epsilon(1e-15));

    BlockFn<double> ident = [](const Td& y) { return y.clone(); };
    Td v = Td::from_vec({2}, {3, -4});
    Td out = euler_step(ident, v);
    CHECK(out.data()[0] == 6.0);
    CHECK(out.data()[1] == -8.0);
}

TEST_CASE("rk_step: o=1 gamma=1 is euler bit-for-bit, Heun hand case, zero gamma") {
    Rng rng(2);
    Td y = random_tensor<double>(rng, {4});
    Td wmat = random_tensor<double>(rng, {4, 4});
    BlockFn<double> F = [&](const Td& u) { return silu(matmul(u.reshape({1, 4}), wmat)).reshape({4}); };

    SolverCoeffs<double> c1 = init_solver_coeffs<double>(SolverSpec::rk(1), 0);
    Td a = rk_step(F, y, c1, 1);
    Td b = euler_step(F, y);
    CHECK(max_abs_diff(a, b) == 0.0);

    // Heun on y' = y (h folded in): F1 = 1, F2 = 2, result 2.5
    BlockFn<double> lin = [](const Td& u) { return u.clone(); };
    SolverCoeffs<double> c2 = init_solver_coeffs<double>(SolverSpec::rk(2), 0);
    c2.rk_gamma.data()[0] = 0.5;
    c2.rk_gamma.data()[1] = 0.5;
    c2.rk_beta[0].data()[0] = 1.0;
    CHECK(rk_step(lin, Td::scalar(1.0), c2, 2).item() == doctest::Approx(2.5).epsilon(1e-15));

    c2.rk_gamma.data()[0] = 0.0;
    c2.rk_gamma.data()[1] = 0.0;
    CHECK(rk_step(lin, Td::scalar(1.0), c2, 2).item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pc_step: hand evaluation of the EMA predictor and corrector") {
    // o=2, gamma=0.5, f=y, y0=1, beta21=1, alpha=1, beta=0, empty history:
    // y_p = 1 + 0.25*1 + 0.5*2 = 2.25, y1 = 1 + F(2.25) = 3.25
    BlockFn<double> lin = [](const Td& u) { return u.clone(); };
    SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::pc(2), 0);
    c.rk_beta[0].data()[0] = 1.0;
    HistoryStack<double> h;
    CHECK(pc_step(lin, Td::scalar(1.0), c, 2, h).item() == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(h.size() == 1);  // F(y_p) pushed

    // alpha=0 beta=0 -> corrector contributes nothing
    SolverCoeffs<double> c0 = init_solver_coeffs<double>(SolverSpec::pc(2), 0);
    c0.corr_alpha.data()[0] = 0.0;
    HistoryStack<double> h0;
    CHECK(pc_step(lin, Td::scalar(1.0), c0, 2, h0).item() == doctest::Approx(1.0).epsilon(1e-12));

    // gamma -> 1: weight on F1 is gamma*(1-gamma) -> 0, on F2 is gamma -> 1
    Td g = Td::scalar(0.999999);
    Td w = ema_weights(g, 2);
    CHECK(w.data()[0] == doctest::Approx(0.999999 * (1 - 0.999999)).epsilon(1e-9));
    CHECK(w.data()[1] == doctest::Approx(0.999999).epsilon(1e-12));
}

TEST_CASE("iie_step: fixed-point refinement on the scalar decay problem") {
    const double hl = 0.25 * -2.0;
    BlockFn<double> F = [&](const Td& u) { return scale(u, hl); };
    SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::iie(3), 0);

    const double expected[4] = {0.5, 0.75, 0.625, 0.6875};
    for (int r = 0; r <= 3; ++r) {
        HistoryStack<double> h;
        std::vector<Td> iterates;
        Td out = iie_step(F, Td::scalar(1.0), r, c, h, &iterates);
        CHECK(out.item() == doctest::Approx(expected[r]).epsilon(1e-15));
        CHECK(static_cast<int>(iterates.size()) == r + 1);
        for (int i = 0; i <= r; ++i)
            CHECK(iterates[static_cast<size_t>(i)].item() ==
                  doctest::Approx(expected[i]).epsilon(1e-15));
        CHECK(h.size() == 1);
    }

    // r -> infinity converges to the analytic implicit-Euler step 2/3
    HistoryStack<double> h;
    CHECK(std::abs(iie_step(F, Td::scalar(1.0), 60, c, h).item() - 2.0 / 3.0) < 1e-14);

    CHECK_THROWS_AS(
        [&] {
            HistoryStack<double> bad;
            iie_step(F, Td::scalar(1.0), -1, c, bad);
        }(),
        config_error);
}

TEST_CASE("reduction chain: IIE(r=0) == DLCL == Euler with zero history coefficients") {
    Rng rng(8);
    Td y = random_tensor<double>(rng, {6});
    Td wmat = random_tensor<double>(rng, {6, 6});
    BlockFn<double> F = [&](const Td& u) { return silu(matmul(u.reshape({1, 6}), wmat)).reshape({6}); };

    // two prior history entries, merge = [0, 0, 1]
    SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::iie(0), 2);
    auto prior = [&] {
        HistoryStack<double> h;
        h.push(random_tensor<double>(rng, {6}));
        h.push(random_tensor<double>(rng, {6}));
        return h;
    };
    Rng rng_snapshot = rng;  // identical prior entries for both runs
    HistoryStack<double> h1 = prior();
    rng = rng_snapshot;
    HistoryStack<double> h2 = prior();

    Td a = iie_step(F, y, 0, c, h1);
    Td b = dlcl_step(F, y, c, h2);
    CHECK(max_abs_diff(a, b) == 0.0);

    Td e = euler_step(F, y);
    CHECK(max_abs_diff(a, e) == 0.0);

    // nonzero history coefficients: linear merge of stored entries
    SolverCoeffs<double> cm = init_solver_coeffs<double>(SolverSpec::iie(0), 2);
    cm.merge.data()[0] = 0.5;
    cm.merge.data()[1] = 0.5;
    cm.merge.data()[2] = 0.0;
    HistoryStack<double> h3;
    Td f0 = Td::from_vec({6}, {1, 1, 1, 1, 1, 1});
    Td f1 = Td::from_vec({6}, {2, 2, 2, 2, 2, 2});
    h3.push(f0);
    h3.push(f1);
    BlockFn<double> zero = [](const Td& u) { return Td::zeros(u.shape()); };
    Td merged = iie_step(zero, y, 0, cm, h3);
    for (int i = 0; i < 6; ++i)
        CHECK(merged.data()[i] == doctest::Approx(y.data()[i] + 1.5).epsilon(1e-15));
}

TEST_CASE("evaluation counts: one F call per stage/iteration") {
    Rng rng(14);
    Td y = random_tensor<double>(rng, {4});
    CountingFn cf{[](const Td& u) { return u.clone(); }};

    euler_step(cf.counted(), y);
    CHECK(cf.calls == 1);

    for (int o = 1; o <= 4; ++o) {
        cf.calls = 0;
        SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::rk(o), 0);
        rk_step(cf.counted(), y, c, o);
        CHECK(cf.calls == o);
    }

    for (int o = 1; o <= 3; ++o) {
        cf.calls = 0;
        SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::pc(o), 0);
        HistoryStack<double> h;
        pc_step(cf.counted(), y, c, o, h);
        CHECK(cf.calls == o + 1);
    }

    for (int r = 0; r <= 4; ++r) {
        cf.calls = 0;
        SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::iie(r), 0);
        HistoryStack<double> h;
        iie_step(cf.counted(), y, r, c, h);
        CHECK(cf.calls == r + 1);
    }
}

TEST_CASE("gradient flow through all r+1 nested evaluations of iie_step") {
    Rng rng(6);
    Td wmat = random_tensor<double>(rng, {4, 4}, 0.4);
    Td y0 = random_tensor<double>(rng, {4});
    SolverCoeffs<double> c = init_solver_coeffs<double>(SolverSpec::iie(3), 0);
    c.merge.data()[0] = 0.9;  // exercise the merge coefficient gradient too

    std::vector<Td> params{wmat, c.merge};
    const double err = grad_check(
        [&] {
            BlockFn<double> F = [&](const Td& u) {
                return silu(matmul(u.reshape({1, 4}), wmat)).reshape({4});
            };
            HistoryStack<double> h;
            return sum(iie_step(F, y0, 3, c, h));
        },
        params, 1e-5);
    CHECK(err < 1e-5);
}

TEST_CASE("fixed-point contraction is exact for the affine scalar map") {
    // |y_i - y*| = |h*lambda| * |y_{i-1} - y*| exactly, assertable to 1e-12
    const ScalarIvp ivp{-2.0, 1.0, 0.25, 1};
    const double ystar = 2.0 / 3.0;
    double prev = std::abs(solve_scalar_ivp(ivp, IvpMethod::iie, 0).back() - ystar);
    for (int r = 1; r <= 8; ++r) {
        const double err = std::abs(solve_scalar_ivp(ivp, IvpMethod::iie, r).back() - ystar);
        CHECK(std::abs(err - 0.5 * prev) < 1e-12);
        prev = err;
    }
}

TEST_CASE("solve_scalar_ivp: exact implicit factor, iie error formula, divergence") {
    const ScalarIvp ivp{-2.0, 1.0, 0.25, 1};
    CHECK(solve_scalar_ivp(ivp, IvpMethod::implicit_exact).back() ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const double y3 = solve_scalar_ivp(ivp, IvpMethod::iie, 3).back();
    CHECK(y3 == doctest::Approx(0.6875).epsilon(1e-15));
    CHECK(std::abs(y3 - 2.0 / 3.0) == doctest::Approx((1.0 / 6.0) * 0.125).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(solve_scalar_ivp(ScalarIvp{-5.0, 1.0, 0.5, 1}, IvpMethod::iie, 1),
                         doctest::Contains("|h*lambda| < 1"), divergence_error);

    // multi-step explicit euler trajectory: factors of (1 + h*lambda)
    const ScalarIvp multi{-2.0, 1.0, 0.25, 5};
    const auto traj = solve_scalar_ivp(multi, IvpMethod::explicit_euler);
    CHECK(traj.size() == 6);
    for (int s = 0; s <= 5; ++s)
        CHECK(traj[static_cast<size_t>(s)] == doctest::Approx(std::pow(0.5, s)).epsilon(1e-12));
}

TEST_CASE("solver spec validation rejects irrelevant fields") {
    auto validate = [](SolverKind kind, int order, int iters) {
        SolverSpec s;
        s.kind = kind;
        s.order = order;
        s.iterations = iters;
        s.validate();
    };
    CHECK_THROWS_AS(validate(SolverKind::euler, 2, 0), config_error);
    CHECK_THROWS_AS(validate(SolverKind::iie, 1, 2), config_error);
    CHECK_THROWS_AS(validate(SolverKind::rk, 0, 0), config_error);
    CHECK_THROWS_AS(validate(SolverKind::rk, 5, 0), config_error);
    CHECK_THROWS_AS(validate(SolverKind::euler, 0, 1), config_error);
    CHECK_NOTHROW(SolverSpec::iie(0).validate());
    CHECK_NOTHROW(SolverSpec::pc(2).validate());
}
