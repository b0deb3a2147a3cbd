#pragma once

// Rank-based comparison pipeline: Friedman test with Kendall's W, Wilcoxon
// signed-rank with Dunn-Sidak adjustment, Cliff's delta, effect size r,
// quartile tags on average ranks and median differences.
//
// Fitness convention throughout: smaller is better, rank 1 is best, and a
// negative delta / median difference means the first group is better.

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace etof::stats {

enum class StatsErrorCode { invalid_input, underpowered };

class StatsError : public std::runtime_error {
public:
    StatsError(StatsErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    StatsErrorCode code() const noexcept { return code_; }

private:
    StatsErrorCode code_;
};

/// Ascending ranks with ties averaged. `tie_sizes`, if given, receives the
/// size of every tie group (singletons included).
inline std::vector<double> average_ranks(std::span<const double> v, std::vector<std::size_t>* tie_sizes = nullptr) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        if (tie_sizes) tie_sizes->push_back(j - i + 1);
        i = j + 1;
    }
    return ranks;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw StatsError(StatsErrorCode::invalid_input, "median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// N blocks x k algorithms, row-major.
struct BlockMatrix {
    std::vector<double> values;
    std::vector<std::string> algorithm_names;
    std::vector<std::string> block_ids;

    std::size_t n_blocks() const noexcept { return block_ids.size(); }
    std::size_t k() const noexcept { return algorithm_names.size(); }

    double at(std::size_t block, std::size_t alg) const { return values[block * k() + alg]; }

    std::span<const double> block(std::size_t b) const { return {values.data() + b * k(), k()}; }

    std::vector<double> column(std::size_t alg) const {
        std::vector<double> c(n_blocks());
        for (std::size_t b = 0; b < n_blocks(); ++b) c[b] = at(b, alg);
        return c;
    }

    std::size_t index_of(const std::string& name) const {
        auto it = std::find(algorithm_names.begin(), algorithm_names.end(), name);
        if (it == algorithm_names.end()) throw StatsError(StatsErrorCode::invalid_input, "unknown algorithm: " + name);
        return static_cast<std::size_t>(it - algorithm_names.begin());
    }

    void validate() const {
        if (k() < 2 || n_blocks() < 2)
            throw StatsError(StatsErrorCode::invalid_input, "block matrix needs N >= 2 blocks and k >= 2 algorithms");
        if (values.size() != n_blocks() * k())
            throw StatsError(StatsErrorCode::invalid_input, "block matrix shape mismatch");
        for (double v : values)
            if (!std::isfinite(v)) throw StatsError(StatsErrorCode::invalid_input, "block matrix has non-finite values");
    }
};

/// Q(df/2, x/2), the upper tail of the chi-square distribution.
inline double chi_square_upper_tail(double x, unsigned df) {
    if (df < 1) throw StatsError(StatsErrorCode::invalid_input, "chi-square needs df >= 1");
    if (!(x >= 0.0)) throw StatsError(StatsErrorCode::invalid_input, "chi-square statistic must be >= 0");
    if (x == 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

// ---------------------------------------------------------------------------
// Friedman

struct FriedmanReport {
    double chi2 = 0.0;
    /// Statistic without the tie correction, kept for comparison.
    double chi2_uncorrected = 0.0;
    unsigned df = 0;
    double p_value = 1.0;
    double kendalls_w = 0.0;
    std::size_t n_blocks = 0;
    std::vector<double> avg_ranks;
    std::vector<int> quartile_tags;
};

/// Tag = ceil(4 p / k) for sorted position p (1 = best average rank). Equal
/// average ranks share the tag of the first position in their run.
inline std::vector<int> quartile_tags(std::span<const double> avg_ranks) {
    const std::size_t k = avg_ranks.size();
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return avg_ranks[a] < avg_ranks[b]; });
    std::vector<int> tags(k, 0);
    int run_tag = 0;
    for (std::size_t p = 0; p < k; ++p) {
        const int tag = static_cast<int>((4 * (p + 1) + k - 1) / k);
        if (p == 0 || avg_ranks[idx[p]] != avg_ranks[idx[p - 1]]) run_tag = tag;
        tags[idx[p]] = run_tag;
    }
    return tags;
}

inline FriedmanReport friedman_test(const BlockMatrix& data) {
    data.validate();
    const std::size_t n = data.n_blocks();
    const std::size_t k = data.k();
    const double N = static_cast<double>(n);
    const double K = static_cast<double>(k);
    std::vector<double> rank_sums(k, 0.0);
    double tie_term = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        std::vector<std::size_t> ties;
        const auto r = average_ranks(data.block(b), &ties);
        for (std::size_t j = 0; j < k; ++j) rank_sums[j] += r[j];
        for (std::size_t t : ties) {
            const double td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
    }
    FriedmanReport rep;
    rep.n_blocks = n;
    rep.df = static_cast<unsigned>(k - 1);
    double ss = 0.0;
    for (double r : rank_sums) ss += r * r;
    rep.chi2_uncorrected = std::max(0.0, 12.0 / (N * K * (K + 1.0)) * ss - 3.0 * N * (K + 1.0));
    const double correction = 1.0 - tie_term / (N * (K * K * K - K));
    rep.chi2 = correction > 0.0 ? rep.chi2_uncorrected / correction : 0.0;
    rep.p_value = chi_square_upper_tail(rep.chi2, rep.df);
    rep.kendalls_w = rep.chi2 / (N * (K - 1.0));
    rep.avg_ranks.resize(k);
    for (std::size_t j = 0; j < k; ++j) rep.avg_ranks[j] = rank_sums[j] / N;
    rep.quartile_tags = quartile_tags(rep.avg_ranks);
    return rep;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

struct WilcoxonResult {
    /// W+ : sum of ranks of positive differences a - b.
    double statistic = 0.0;
    /// Normal score with continuity correction, signed like W+ - E[W+].
    double z = 0.0;
    double p_raw = 1.0;
    std::size_t n_used = 0;
    std::size_t zeros_dropped = 0;
    bool exact = false;
};

inline constexpr std::size_t kWilcoxonMinPairs = 5;
inline constexpr std::size_t kWilcoxonExactMax = 20;

namespace detail {

/// Two-sided exact p for W+ given the (possibly tied) ranks, by dynamic
/// programming over doubled ranks, which are integers.
inline double wilcoxon_exact_p(std::span<const double> ranks, double w_plus) {
    std::vector<std::size_t> twice(ranks.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        twice[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
        total += twice[i];
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r : twice) {
        for (std::size_t s = reach + 1; s-- > 0;)
            if (count[s] != 0.0) count[s + r] += count[s];
        reach += r;
    }
    const auto observed = static_cast<std::size_t>(std::lround(2.0 * w_plus));
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t s = 0; s <= total; ++s) {
        if (s <= observed) lower += count[s];
        if (s >= observed) upper += count[s];
    }
    const double all = std::ldexp(1.0, static_cast<int>(ranks.size()));
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

}  // namespace detail

/// Paired two-sided signed-rank test on a - b. Zero differences are dropped.
/// Exact null distribution up to 20 pairs, tie-corrected normal
/// approximation with 0.5 continuity correction beyond.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw StatsError(StatsErrorCode::invalid_input, "wilcoxon: samples differ in length");
    std::vector<double> diff;
    WilcoxonResult res;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) ++res.zeros_dropped;
        else diff.push_back(d);
    }
    res.n_used = diff.size();
    if (res.n_used < kWilcoxonMinPairs)
        throw StatsError(StatsErrorCode::underpowered, "wilcoxon: " + std::to_string(res.n_used) +
                                                           " nonzero differences, need at least " +
                                                           std::to_string(kWilcoxonMinPairs));
    std::vector<double> mag(diff.size());
    for (std::size_t i = 0; i < diff.size(); ++i) mag[i] = std::abs(diff[i]);
    std::vector<std::size_t> ties;
    const auto ranks = average_ranks(mag, &ties);
    for (std::size_t i = 0; i < diff.size(); ++i)
        if (diff[i] > 0.0) res.statistic += ranks[i];

    const double n = static_cast<double>(res.n_used);
    const double mean = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (std::size_t t : ties) {
        const double td = static_cast<double>(t);
        var -= (td * td * td - td) / 48.0;
    }
    const double dev = res.statistic - mean;
    const double corrected = std::max(0.0, std::abs(dev) - 0.5);
    res.z = var > 0.0 ? std::copysign(corrected / std::sqrt(var), dev) : 0.0;
    if (res.n_used <= kWilcoxonExactMax) {
        res.exact = true;
        res.p_raw = detail::wilcoxon_exact_p(ranks, res.statistic);
    } else {
        res.p_raw = std::min(1.0, std::erfc(std::abs(res.z) / std::sqrt(2.0)));
    }
    return res;
}

/// 1 - (1 - p)^m, clamped to [0, 1].
inline double dunn_sidak_adjust(double p_raw, std::size_t m) {
    if (m < 1) throw StatsError(StatsErrorCode::invalid_input, "dunn_sidak: m must be >= 1");
    const double p = std::clamp(p_raw, 0.0, 1.0);
    if (p >= 1.0) return 1.0;
    if (m == 1) return p;
    // log1p/expm1 round-trip can land an ulp below p
    return std::clamp(-std::expm1(static_cast<double>(m) * std::log1p(-p)), p, 1.0);
}

/// |z| / sqrt(n_pairs).
inline double effect_size_r(double z, std::size_t n_pairs) {
    if (n_pairs < 1) throw StatsError(StatsErrorCode::invalid_input, "effect_size_r: n_pairs must be >= 1");
    return std::abs(z) / std::sqrt(static_cast<double>(n_pairs));
}

/// (#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|), via binary search on sorted b.
inline double cliffs_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw StatsError(StatsErrorCode::invalid_input, "cliffs_delta: empty sample");
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sb.begin(), sb.end());
    long long greater = 0;
    long long less = 0;
    for (double x : a) {
        greater += std::lower_bound(sb.begin(), sb.end(), x) - sb.begin();
        less += sb.end() - std::upper_bound(sb.begin(), sb.end(), x);
    }
    return static_cast<double>(greater - less) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

inline double median_difference(std::span<const double> a, std::span<const double> b) {
    return median({a.begin(), a.end()}) - median({b.begin(), b.end()});
}

// ---------------------------------------------------------------------------
// Reference-vs-rest comparison

struct PairwiseRow {
    std::string group1;
    std::string group2;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    double z = 0.0;
    double effect_r = 0.0;
    double cliffs_delta = 0.0;
    double median_diff = 0.0;
    std::size_t n_pairs = 0;
    std::size_t zeros_dropped = 0;
    bool exact = false;
    /// "ok", or the reason the signed-rank test refused the pair.
    std::string status = "ok";
};

struct ComparisonReport {
    std::string reference;
    std::vector<std::string> algorithm_names;
    FriedmanReport friedman;
    std::vector<PairwiseRow> rows;
};

inline ComparisonReport compare_all(const BlockMatrix& data, const std::string& reference) {
    ComparisonReport rep;
    rep.reference = reference;
    rep.algorithm_names = data.algorithm_names;
    const std::size_t ref = data.index_of(reference);
    rep.friedman = friedman_test(data);
    const std::size_t m = data.k() - 1;
    const auto ref_col = data.column(ref);
    for (std::size_t j = 0; j < data.k(); ++j) {
        if (j == ref) continue;
        const auto col = data.column(j);
        PairwiseRow row;
        row.group1 = reference;
        row.group2 = data.algorithm_names[j];
        row.cliffs_delta = cliffs_delta(ref_col, col);
        row.median_diff = median_difference(ref_col, col);
        try {
            const auto w = wilcoxon_signed_rank(ref_col, col);
            row.p_raw = w.p_raw;
            row.z = w.z;
            row.n_pairs = w.n_used;
            row.zeros_dropped = w.zeros_dropped;
            row.exact = w.exact;
            row.effect_r = effect_size_r(w.z, w.n_used);
            row.p_adjusted = dunn_sidak_adjust(w.p_raw, m);
        } catch (const StatsError& e) {
            if (e.code() != StatsErrorCode::underpowered) throw;
            row.status = "underpowered";
            row.p_raw = 1.0;
            row.p_adjusted = 1.0;
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

/// Three decimals, with anything below 5e-4 printed as 0.000.
inline std::string format_p(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", p < 5e-4 ? 0.0 : p);
    return buf;
}

}  // namespace etof::stats
