#include <gtest/gtest.h>

#include <fockmetro/oracle.hpp>

using namespace fockmetro;

TEST(ReducedOracle, LinearExample) {
    const auto r = brute_force_reduced({4, 3.0, Encoding::linear});
    EXPECT_NEAR(r.best_value, 12.0, 1e-9);
    EXPECT_NEAR(r.gap, 0.0, 1e-9);
    ASSERT_EQ(r.best_distribution.size(), 2u);
    EXPECT_NEAR(r.best_distribution.at("P_0_0"), 0.25, 1e-12);
    EXPECT_NEAR(r.best_distribution.at("P_4_4"), 0.375, 1e-12);
}

TEST(ReducedOracle, NonlinearMatchesClosedForm) {
    for (double nb : {1.5, 3.0, 5.0, 5.5, 7.2}) {
        const auto r = brute_force_reduced({4, nb, Encoding::nonlinear});
        EXPECT_NEAR(r.best_value, r.theorem_value, 1e-8 * r.theorem_value) << nb;
    }
}

TEST(ReducedOracle, NoonAtNbarEqualN) {
    for (int N = 2; N <= 6; ++N) {
        EXPECT_NEAR(brute_force_reduced({N, double(N), Encoding::linear}).best_value, N * N, 1e-9);
        EXPECT_NEAR(brute_force_reduced({N, double(N), Encoding::nonlinear}).best_value, std::pow(N, 4), 1e-7);
    }
}

TEST(ReducedOracle, InfeasibleRejected) {
    EXPECT_THROW(brute_force_reduced({3, 6.5, Encoding::linear}), validation_error);
    EXPECT_THROW(brute_force_reduced({0, 0.5, Encoding::linear}), validation_error);
}

TEST(ReducedOracle, Breakpoints) {
    const int want[] = {4, 5, 7, 8, 9, 11};
    for (int N = 3; N <= 8; ++N) {
        EXPECT_EQ(nonlinear_breakpoint(N), want[N - 3]) << N;
        EXPECT_EQ(nonlinear_breakpoint(N), mid_high_boundary(N));
    }
}

TEST(FullOracle, SmallLinearCase) {
    const auto r = brute_force_full({3, 2.0, Encoding::linear}, 4);
    EXPECT_NEAR(r.best_value, 6.0, 1e-3 * 6);
    EXPECT_LE(r.best_value, 6.0 + 1e-9);
    EXPECT_LT(r.symmetry_error, 1e-3);
}

// random feasible points never beat the closed form
TEST(FullOracle, RandomPointsBelowTheorem) {
    std::mt19937_64 rng(17);
    for (auto e : {Encoding::linear, Encoding::nonlinear})
        for (int N : {2, 3, 4}) {
            std::uniform_real_distribution<double> U(0.05, 2.0 * N - 0.05);
            for (int rep = 0; rep < 200; ++rep) {
                const FullProblem p{N, U(rng), e};
                auto P = random_feasible_full(p, rng);
                double nb = 0, tot = 0;
                for (int k = 0; k < p.dim(); ++k) {
                    nb += P[k] * p.n(k);
                    tot += P[k];
                }
                EXPECT_NEAR(tot, 1.0, 1e-12);
                EXPECT_NEAR(nb, p.nbar, 1e-10);
                EXPECT_LE(full_objective(p, P), closed_form_qfi({N, p.nbar, e}) * (1 + 1e-9) + 1e-9);
            }
        }
}
