#pragma once

// Buffer-occupancy Markov chain for limited granting and the throughput bound
// it implies. States are buffer contents in packet quanta 0..K; one step is one
// granting cycle, in which Poisson(A) quanta arrive and at most lim_q are served.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "twdm/core.hpp"

namespace twdm::markov {

/// How a step that ends above its starting state is weighted.
enum class GrowthRule {
    /// Net change is arrivals minus lim_q in every case, so growth by d needs
    /// d + lim_q arrivals. Rows are stochastic by construction.
    ServedEachCycle,
    /// Growth by d is weighted by Pr(d arrivals), as the transition list is
    /// usually written; the resulting row mass exceeds one and every row is
    /// rescaled to sum to one.
    ArrivalsOnly,
};

struct ChainConfig {
    int lim_q = 1;       // grant cap in quanta
    int K = 1;           // buffer capacity in quanta; state K is "full"
    double A = 0.0;      // mean arrivals per cycle
    double rho = 0.0;    // load, used by the throughput formula
    GrowthRule growth = GrowthRule::ServedEachCycle;

    void validate() const {
        if (lim_q < 1) throw std::invalid_argument("markov: lim_q must be at least 1");
        if (K < lim_q) throw std::invalid_argument("markov: K must be at least lim_q");
        if (!(A >= 0.0) || !std::isfinite(A)) throw std::invalid_argument("markov: A must be finite and non-negative");
    }
};

/// Compressed-row (CSR) row-stochastic matrix over states 0..size()-1.
struct TransitionMatrix {
    std::vector<std::size_t> row_ptr{0};
    std::vector<int> col;
    std::vector<double> val;

    std::size_t size() const { return row_ptr.size() - 1; }

    double at(std::size_t i, std::size_t j) const {
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            if (static_cast<std::size_t>(col[k]) == j) return val[k];
        return 0.0;
    }

    double row_sum(std::size_t i) const {
        double s = 0.0;
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k];
        return s;
    }

    /// y = x P
    void left_multiply(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(size(), 0.0);
        for (std::size_t i = 0; i < size(); ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) y[static_cast<std::size_t>(col[k])] += xi * val[k];
        }
    }
};

/// Poisson(A) probability of k events, evaluated in log space.
inline double poisson_pmf(double A, int k) {
    if (k < 0) return 0.0;
    if (A == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(-A + k * std::log(A) - std::lgamma(k + 1.0));
}

/// Arrival counts beyond this point carry less than `eps` probability in total.
inline int poisson_truncation(double A, double eps = 1e-13) {
    if (A == 0.0) return 0;
    double cum = 0.0;
    int k = 0;
    const int hard_cap = static_cast<int>(A + 50.0 * std::sqrt(A) + 200.0);
    for (; k < hard_cap; ++k) {
        cum += poisson_pmf(A, k);
        if (k >= A && 1.0 - cum < eps) break;
    }
    return k;
}

inline TransitionMatrix build_transition_matrix(const ChainConfig& cfg) {
    cfg.validate();
    const int K = cfg.K;
    const int lim = cfg.lim_q;
    const int kmax = poisson_truncation(cfg.A);
    std::vector<double> pmf(static_cast<std::size_t>(kmax) + 1);
    for (int k = 0; k <= kmax; ++k) pmf[static_cast<std::size_t>(k)] = poisson_pmf(cfg.A, k);

    TransitionMatrix P;
    std::vector<double> row;
    for (int b = 0; b <= K; ++b) {
        // destinations span [max(0, b - lim), min(K, b + kmax + 1)]
        const int lo = std::max(0, b - lim);
        const int hi = std::min(K, b + kmax + 1);
        row.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
        auto add = [&](int dest, double p) { row[static_cast<std::size_t>(std::min(dest, K) - lo)] += p; };
        double placed = 0.0;
        if (cfg.growth == GrowthRule::ServedEachCycle) {
            for (int a = 0; a <= kmax; ++a) {
                add(std::max(0, b + a - lim), pmf[static_cast<std::size_t>(a)]);
                placed += pmf[static_cast<std::size_t>(a)];
            }
            // truncated Poisson tail joins the largest destination reached
            add(std::max(0, b + kmax + 1 - lim), std::max(0.0, 1.0 - placed));
        } else {
            for (int a = 0; a <= std::min(kmax, lim); ++a) add(std::max(0, b + a - lim), pmf[static_cast<std::size_t>(a)]);
            for (int d = 1; d <= kmax && b + d <= K; ++d) {
                if (b + d < K) {
                    add(b + d, pmf[static_cast<std::size_t>(d)]);
                } else {
                    double tail = 0.0;
                    for (int j = d; j <= kmax; ++j) tail += pmf[static_cast<std::size_t>(j)];
                    add(K, tail);
                }
            }
            double s = 0.0;
            for (double v : row) s += v;
            for (double& v : row) v /= s;
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i] == 0.0) continue;
            P.col.push_back(lo + static_cast<int>(i));
            P.val.push_back(row[i]);
        }
        P.row_ptr.push_back(P.col.size());
    }
    return P;
}

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SteadyState {
    std::vector<double> pi;
    std::size_t iterations = 0;
    double residual = 0.0;  // ||pi P - pi||_1
};

inline double l1_residual(const TransitionMatrix& P, const std::vector<double>& pi) {
    std::vector<double> y;
    P.left_multiply(pi, y);
    double r = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) r += std::abs(y[i] - pi[i]);
    return r;
}

/// Power iteration from the uniform distribution. Stops once successive iterates
/// differ by less than `tol` in L1. Throws SolverError when the iteration cap is
/// hit, which is what periodic or very slowly mixing chains do, or when the final
/// residual exceeds 1e-10.
inline SteadyState steady_state(const TransitionMatrix& P, double tol = 1e-12, std::size_t max_iterations = 1'000'000) {
    const std::size_t n = P.size();
    if (n == 0) throw SolverError("steady_state: empty matrix");
    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    std::vector<double> y;
    for (std::size_t it = 1; it <= max_iterations; ++it) {
        P.left_multiply(x, y);
        double sum = 0.0;
        for (double v : y) sum += v;
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] /= sum;
            diff += std::abs(y[i] - x[i]);
        }
        x.swap(y);
        if (diff < tol) {
            const double res = l1_residual(P, x);
            if (res >= 1e-10) throw SolverError("steady_state: converged iterate has residual " + std::to_string(res));
            return {std::move(x), it, res};
        }
    }
    throw SolverError("steady_state: no convergence within " + std::to_string(max_iterations) + " iterations");
}

/// Direct solve by state reduction (Grassmann-Taksar-Heyman), exploiting the
/// band structure: a step moves down by at most lim_q states and up by a
/// bounded amount, and elimination creates no fill outside that band. All
/// arithmetic is on non-negative numbers, so it stays accurate for chains that
/// mix too slowly for power iteration.
inline SteadyState steady_state_direct(const TransitionMatrix& P) {
    const std::size_t n = P.size();
    if (n == 0) throw SolverError("steady_state_direct: empty matrix");
    long lower = 0;
    long upper = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = P.row_ptr[i]; k < P.row_ptr[i + 1]; ++k) {
            const long d = static_cast<long>(P.col[k]) - static_cast<long>(i);
            lower = std::max(lower, -d);
            upper = std::max(upper, d);
        }
    }
    const long width = lower + upper + 1;
    std::vector<double> band(n * static_cast<std::size_t>(width), 0.0);
    auto cell = [&](long i, long j) -> double& {
        return band[static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j - i + lower)];
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = P.row_ptr[i]; k < P.row_ptr[i + 1]; ++k) cell(static_cast<long>(i), P.col[k]) = P.val[k];

    for (long m = static_cast<long>(n) - 1; m >= 1; --m) {
        double s = 0.0;
        for (long j = std::max(0L, m - lower); j < m; ++j) s += cell(m, j);
        if (!(s > 0.0)) throw SolverError("steady_state_direct: chain is reducible");
        const long i0 = std::max(0L, m - upper);
        for (long i = i0; i < m; ++i) cell(i, m) /= s;
        for (long i = i0; i < m; ++i) {
            const double f = cell(i, m);
            if (f == 0.0) continue;
            for (long j = std::max(0L, m - lower); j < m; ++j) cell(i, j) += f * cell(m, j);
        }
    }
    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    for (long j = 1; j < static_cast<long>(n); ++j) {
        double v = 0.0;
        for (long i = std::max(0L, j - upper); i < j; ++i) v += pi[static_cast<std::size_t>(i)] * cell(i, j);
        pi[static_cast<std::size_t>(j)] = v;
        // supercritical chains grow geometrically towards K; rescale before overflow
        if (v > 1e200)
            for (long i = 0; i <= j; ++i) pi[static_cast<std::size_t>(i)] *= 1e-200;
    }
    double total = 0.0;
    for (double v : pi) total += v;
    for (double& v : pi) v /= total;
    const double res = l1_residual(P, pi);
    return {std::move(pi), 0, res};
}

/// Load times the probability that the buffer is not full, in percent.
inline double throughput_bound(const std::vector<double>& pi, double rho) {
    if (pi.empty()) throw std::invalid_argument("throughput_bound: empty distribution");
    return rho * (1.0 - pi.back()) * 100.0;
}

/// How the mean arrivals per cycle follow from the load.
enum class ArrivalMode {
    Literal,  // cycle length T = rho * 2 ms and rate rho * r, so A grows as rho^2
    Linear,   // fixed 2 ms cycle, so A grows as rho
};

struct BoundParams {
    BitRate onu_rate = 125'000'000;
    BitRate olt_rate = 1'000'000'000;
    std::uint32_t group_size = 8;
    double load = 1.0;
    Time cycle = Time::ms(2);  // lim x N
    Bytes quantum = 1500;
    std::int64_t buffer_bits = 1'000'000'000;
    std::optional<int> buffer_quanta;  // overrides buffer_bits / quantum
    ArrivalMode mode = ArrivalMode::Literal;
    GrowthRule growth = GrowthRule::ServedEachCycle;
};

inline ChainConfig make_chain_config(const BoundParams& p) {
    if (p.onu_rate <= 0 || p.olt_rate <= 0 || p.group_size == 0 || p.quantum <= 0)
        throw std::invalid_argument("bound: rates, group size and quantum must be positive");
    if (!(p.load >= 0.0 && p.load <= 1.0)) throw std::invalid_argument("bound: load must lie in [0, 1]");
    const double quantum_bits = static_cast<double>(p.quantum) * 8.0;
    const double cycle_s = p.cycle.seconds();
    ChainConfig c;
    c.rho = p.load;
    c.growth = p.growth;
    // each ONU owns cycle / N of receiver time per cycle
    c.lim_q = static_cast<int>(std::floor(cycle_s / p.group_size * static_cast<double>(p.olt_rate) / quantum_bits));
    c.K = p.buffer_quanta ? *p.buffer_quanta : static_cast<int>(p.buffer_bits / (p.quantum * 8));
    const double lambda = p.load * static_cast<double>(p.onu_rate) / quantum_bits;  // quanta per second
    const double T = p.mode == ArrivalMode::Literal ? p.load * cycle_s : cycle_s;
    c.A = lambda * T;
    c.validate();
    return c;
}

struct BoundResult {
    double rho = 0.0;
    int K = 0;
    int lim_q = 0;
    double A = 0.0;
    double pi_full = 0.0;
    double throughput_pct = 0.0;
};

inline BoundResult compute_bound(const BoundParams& p) {
    const ChainConfig c = make_chain_config(p);
    const TransitionMatrix P = build_transition_matrix(c);
    const SteadyState ss = steady_state_direct(P);
    return {c.rho, c.K, c.lim_q, c.A, ss.pi.back(), throughput_bound(ss.pi, c.rho)};
}

}  // namespace twdm::markov
