#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sepdiff/metrics.hpp"
#include "sepdiff/rng.hpp"

using namespace sepdiff;

namespace {

std::vector<double> random_vec(std::uint64_t seed, std::size_t n) {
    RandomStream rs(seed, "metrics-test");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rs.normal(i);
    return v;
}

// second exhaustive PIT search, recursive assignment instead of
// std::next_permutation
void pit_recurse(const std::vector<double>& table, std::size_t K, std::size_t i,
                 std::vector<std::size_t>& used, std::vector<std::size_t>& cur, double acc,
                 double& best, std::vector<std::size_t>& best_perm) {
    if (i == K) {
        if (acc > best) {
            best = acc;
            best_perm = cur;
        }
        return;
    }
    for (std::size_t j = 0; j < K; ++j) {
        if (std::find(used.begin(), used.end(), j) != used.end()) continue;
        used.push_back(j);
        cur.push_back(j);
        pit_recurse(table, K, i + 1, used, cur, acc + table[i * K + j], best, best_perm);
        used.pop_back();
        cur.pop_back();
    }
}

PitResult pit_oracle(const std::vector<std::vector<double>>& refs,
                     const std::vector<std::vector<double>>& ests, MetricFn metric) {
    const std::size_t K = refs.size();
    std::vector<double> table(K * K);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) table[i * K + j] = metric(refs[i], ests[j]);
    }
    std::vector<std::size_t> used, cur, best_perm;
    double best = -1e300;
    pit_recurse(table, K, 0, used, cur, 0.0, best, best_perm);
    PitResult out;
    out.perm = best_perm;
    out.mean = best / static_cast<double>(K);
    for (std::size_t i = 0; i < K; ++i) out.scores.push_back(table[i * K + best_perm[i]]);
    return out;
}

}  // namespace

TEST_CASE("si_sdr basics") {
    SUBCASE("perfect estimate hits the cap") {
        const std::vector<double> s{0.3, -0.5, 0.8};
        CHECK(si_sdr(s, s) == kMetricCapDb);
    }
    SUBCASE("scale invariance within 1e-6 dB") {
        const auto s = random_vec(1, 128);
        const auto e = random_vec(2, 128);
        const double base = si_sdr(s, e);
        for (double alpha : {0.5, 2.0, -1.0}) {
            auto scaled = e;
            for (double& v : scaled) v *= alpha;
            CHECK(std::abs(si_sdr(s, scaled) - base) <= 1e-6);
        }
    }
    SUBCASE("hand-evaluated case is exactly 0 dB") {
        const std::vector<double> ref{1.0, 0.0};
        const std::vector<double> est{1.0, 1.0};
        CHECK(si_sdr(ref, est) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("zero reference is a parameter error") {
        const std::vector<double> z{0.0, 0.0};
        const std::vector<double> e{1.0, 1.0};
        CHECK_THROWS_AS(si_sdr(z, e), ParamError);
    }
    SUBCASE("length mismatch is a shape error") {
        const std::vector<double> a{1.0};
        const std::vector<double> b{1.0, 2.0};
        CHECK_THROWS_AS(si_sdr(a, b), ShapeError);
    }
}

TEST_CASE("sdr basics") {
    SUBCASE("perfect estimate hits the cap") {
        const std::vector<double> s{0.3, -0.5};
        CHECK(sdr(s, s) == kMetricCapDb);
    }
    SUBCASE("doubling a unit reference gives 0 dB") {
        const std::vector<double> ref{1.0};
        const std::vector<double> est{2.0};
        CHECK(sdr(ref, est) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("matches a straight-line oracle on random pairs") {
        for (std::uint64_t trial = 0; trial < 10; ++trial) {
            const auto s = random_vec(10 + trial, 64);
            const auto e = random_vec(30 + trial, 64);
            double sig = 0.0, err = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                sig += s[i] * s[i];
                err += (e[i] - s[i]) * (e[i] - s[i]);
            }
            const double expect = 10.0 * std::log10(sig / err);
            CHECK(sdr(s, e) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("pit assignment") {
    SUBCASE("reversed estimates return the reversing permutation") {
        std::vector<std::vector<double>> refs{random_vec(1, 32), random_vec(2, 32),
                                              random_vec(3, 32)};
        std::vector<std::vector<double>> ests{refs[2], refs[1], refs[0]};
        const auto r = pit_assign(refs, ests, &si_sdr);
        CHECK(r.perm == std::vector<std::size_t>{2, 1, 0});
        for (double s : r.scores) CHECK(s == kMetricCapDb);
    }
    SUBCASE("K = 1 is the identity") {
        std::vector<std::vector<double>> refs{random_vec(4, 16)};
        std::vector<std::vector<double>> ests{random_vec(5, 16)};
        const auto r = pit_assign(refs, ests, &si_sdr);
        CHECK(r.perm == std::vector<std::size_t>{0});
    }
    SUBCASE("matches an independently coded exhaustive search") {
        for (std::uint64_t trial = 0; trial < 20; ++trial) {
            const std::size_t K = 2 + trial % 3;
            std::vector<std::vector<double>> refs, ests;
            for (std::size_t k = 0; k < K; ++k) {
                refs.push_back(random_vec(100 + 10 * trial + k, 24));
                ests.push_back(random_vec(500 + 10 * trial + k, 24));
            }
            const auto a = pit_assign(refs, ests, &si_sdr);
            const auto b = pit_oracle(refs, ests, &si_sdr);
            CHECK(a.perm == b.perm);
            CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
        }
    }
    SUBCASE("errors") {
        std::vector<std::vector<double>> nine(9, random_vec(9, 8));
        CHECK_THROWS_AS(pit_assign(nine, nine, &si_sdr), ParamError);
        std::vector<std::vector<double>> two(2, random_vec(1, 8));
        std::vector<std::vector<double>> three(3, random_vec(2, 8));
        CHECK_THROWS_AS(pit_assign(two, three, &si_sdr), ShapeError);
    }
}

TEST_CASE("swap rate") {
    const std::size_t frame = 64, frames = 10, n = frame * frames;
    // two clearly distinct periodic references with full support
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::sin(0.07 * static_cast<double>(i)) + 0.3;
        b[i] = std::cos(0.013 * static_cast<double>(i)) - 0.2;
    }
    const std::vector<std::vector<double>> refs{a, b};

    SUBCASE("perfect estimates have zero swap rate") {
        CHECK(swap_rate(refs, refs, frame) == 0.0);
    }
    SUBCASE("half-crossed estimates give 0.5") {
        std::vector<double> e1(n), e2(n);
        for (std::size_t i = 0; i < n; ++i) {
            const bool first_half = i < n / 2;
            e1[i] = first_half ? a[i] : b[i];
            e2[i] = first_half ? b[i] : a[i];
        }
        CHECK(swap_rate(refs, {e1, e2}, frame) == doctest::Approx(0.5));
    }
    SUBCASE("stays within [0, 1] on random estimates") {
        const std::vector<std::vector<double>> ests{random_vec(7, n), random_vec(8, n)};
        const double r = swap_rate(refs, ests, frame);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
    SUBCASE("K != 2 is rejected") {
        std::vector<std::vector<double>> three{a, b, a};
        CHECK_THROWS_AS(swap_rate(three, three, frame), ParamError);
    }
}

TEST_CASE("aggregates average per-mixture means exactly") {
    std::vector<MixtureEval> rows;
    for (std::size_t i = 0; i < 4; ++i) {
        MixtureEval r;
        r.mixture_id = i;
        r.solver = "hybrid";
        r.si_sdr_db = {static_cast<double>(i), static_cast<double>(i) + 1.0};
        r.sdr_db = {2.0 * static_cast<double>(i), 0.0};
        r.swap = 0.1 * static_cast<double>(i);
        rows.push_back(r);
    }
    const auto agg = aggregate_rows("hybrid", rows);
    CHECK(agg.n == 4);
    CHECK(agg.failures == 0);
    // mean over per-mixture means: (0.5 + 1.5 + 2.5 + 3.5) / 4 = 2.0
    CHECK(std::abs(agg.mean_si_sdr - 2.0) <= 1e-12);
    CHECK(std::abs(agg.mean_swap - 0.15) <= 1e-12);

    MixtureEval failed;
    failed.mixture_id = 4;
    failed.solver = "hybrid";
    failed.failed = true;
    rows.push_back(failed);
    const auto agg2 = aggregate_rows("hybrid", rows);
    CHECK(agg2.n == 5);
    CHECK(agg2.failures == 1);
    CHECK(std::abs(agg2.mean_si_sdr - 2.0) <= 1e-12);
}
