#include "msc/qk_twist.hpp"

#include "msc/cache.hpp"
#include "msc/error.hpp"
#include "msc/parallel.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

namespace msc {

Eigen::MatrixXd qk_matrix(const Eigen::MatrixXd& mean_acts, const HeadTensors& head) {
    if (mean_acts.rows() != kDays) throw ValidationError("mean activations must have 365 rows");
    if (head.Wq.cols() != mean_acts.cols() || head.Wk.cols() != mean_acts.cols() || head.Wq.rows() != head.Wk.rows() ||
        head.Wq.rows() == 0)
        throw ValidationError("head tensors do not match activation width");
    const Eigen::MatrixXd Q = mean_acts * head.Wq.transpose();
    const Eigen::MatrixXd K = mean_acts * head.Wk.transpose();
    return Q * K.transpose() / std::sqrt(static_cast<double>(head.d_head()));
}

OffsetProfile profile_from_matrix(const Eigen::MatrixXd& M, bool circular, const std::vector<int>* perm) {
    if (M.rows() != kDays || M.cols() != kDays) throw ValidationError("QK matrix must be 365 x 365");
    std::vector<double> sum(kOffsets, 0.0);
    std::vector<int> count(kOffsets, 0);
    for (int i = 0; i < kDays; ++i) {
        const int pi = perm ? (*perm)[static_cast<std::size_t>(i)] : i;
        for (int j = 0; j < kDays; ++j) {
            int c = i - j;
            if (circular) {
                c = ((c % kDays) + kDays) % kDays;
                if (c > kMaxOffset) c -= kDays;
            } else if (c < -kMaxOffset || c > kMaxOffset) {
                continue;
            }
            const int pj = perm ? (*perm)[static_cast<std::size_t>(j)] : j;
            sum[static_cast<std::size_t>(c + kMaxOffset)] += M(pi, pj);
            ++count[static_cast<std::size_t>(c + kMaxOffset)];
        }
    }

    OffsetProfile out;
    out.S.resize(kOffsets);
    for (int t = 0; t < kOffsets; ++t) out.S[static_cast<std::size_t>(t)] = sum[static_cast<std::size_t>(t)] / count[static_cast<std::size_t>(t)];

    double m = 0.0;
    for (int t = 0; t < kOffsets; ++t)
        if (t != kMaxOffset) m += out.S[static_cast<std::size_t>(t)];
    m /= kOffsets - 1;
    double ss = 0.0;
    for (int t = 0; t < kOffsets; ++t)
        if (t != kMaxOffset) ss += (out.S[static_cast<std::size_t>(t)] - m) * (out.S[static_cast<std::size_t>(t)] - m);
    const double sd = std::sqrt(ss / (kOffsets - 2));

    out.z.assign(kOffsets, 0.0);
    const double scale = std::abs(m) + 1e-300;
    if (!(sd > 1e-12 * scale) || !std::isfinite(sd)) {
        out.degenerate = true;
        out.peak_z = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double best = -1.0;
    for (int t = 0; t < kOffsets; ++t) {
        out.z[static_cast<std::size_t>(t)] = (out.S[static_cast<std::size_t>(t)] - m) / sd;
        if (t == kMaxOffset) continue;
        if (std::abs(out.z[static_cast<std::size_t>(t)]) > best) {
            best = std::abs(out.z[static_cast<std::size_t>(t)]);
            out.c_star = t - kMaxOffset;
        }
    }
    out.peak_z = out.z_at(out.c_star);
    return out;
}

OffsetProfile offset_profile(const Eigen::MatrixXd& mean_acts, const HeadTensors& head, bool circular) {
    return profile_from_matrix(qk_matrix(mean_acts, head), circular);
}

std::vector<HeadScanResult> scan_heads(const Eigen::MatrixXd& mean_acts, const std::vector<HeadTensors>& heads,
                                       int n_perm, double q, std::uint64_t seed, bool circular) {
    if (n_perm < 50) throw ValidationError("scan_heads needs n_perm >= 50");
    if (!(q > 0 && q < 1)) throw ValidationError("FDR level must be in (0, 1)");
    const std::size_t H = heads.size();
    std::vector<Eigen::MatrixXd> mats(H);
    std::vector<HeadScanResult> out(H);
    parallel_for(H, [&](std::size_t h) {
        mats[h] = qk_matrix(mean_acts, heads[h]);
        auto& r = out[h];
        r.layer = heads[h].layer;
        r.head = heads[h].head;
        r.profile = profile_from_matrix(mats[h], circular);
        r.c_star = r.profile.c_star;
        r.peak_z = r.profile.peak_z;
    });

    const std::size_t P = static_cast<std::size_t>(n_perm);
    std::vector<double> null_peak(H * P, 0.0);
    parallel_for(H * P, [&](std::size_t idx) {
        const std::size_t h = idx / P, p = idx % P;
        if (out[h].profile.degenerate) return;
        std::vector<int> perm(kDays);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng = Rng::substream(mix(seed, h), p);
        rng.shuffle(perm);
        const OffsetProfile prof = profile_from_matrix(mats[h], circular, &perm);
        null_peak[idx] = prof.degenerate ? 0.0 : std::abs(prof.peak_z);
    });

    std::vector<double> pvals(H, 1.0);
    for (std::size_t h = 0; h < H; ++h) {
        if (out[h].profile.degenerate) continue;
        const double obs = std::abs(out[h].peak_z);
        std::size_t count = 0;
        for (std::size_t p = 0; p < P; ++p) count += null_peak[h * P + p] >= obs;
        pvals[h] = (1.0 + static_cast<double>(count)) / (static_cast<double>(P) + 1.0);
    }
    const auto qv = bh_adjust(pvals);
    for (std::size_t h = 0; h < H; ++h) {
        out[h].p_perm = pvals[h];
        out[h].q_bh = qv[h];
        out[h].significant = qv[h] <= q;
    }
    return out;
}

std::string scan_csv(const std::vector<HeadScanResult>& results) {
    std::string s = "L,h,c_star,z,p,q\n";
    char buf[256];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6f,%.6g,%.6g\n", r.layer, r.head, r.c_star,
                      std::isnan(r.peak_z) ? 0.0 : r.peak_z, r.p_perm, r.q_bh);
        s += buf;
    }
    return s;
}

namespace {

double normal_logpdf(double x, double mu, double var) {
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (x - mu) * (x - mu) / var);
}

GmmFit run_em(const std::vector<double>& x, std::vector<double> means, double init_var) {
    const std::size_t n = x.size(), k = means.size();
    GmmFit fit;
    fit.k = static_cast<int>(k);
    fit.means = std::move(means);
    fit.variances.assign(k, std::max(init_var, kGmmVarianceFloor));
    fit.weights.assign(k, 1.0 / static_cast<double>(k));
    std::vector<double> resp(n * k);
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 500; ++iter) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                resp[i * k + c] = std::log(fit.weights[c]) + normal_logpdf(x[i], fit.means[c], fit.variances[c]);
                mx = std::max(mx, resp[i * k + c]);
            }
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += std::exp(resp[i * k + c] - mx);
            const double lse = mx + std::log(s);
            ll += lse;
            for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(resp[i * k + c] - lse);
        }
        fit.log_lik = ll;
        if (std::abs(ll - prev) < 1e-10 * (1.0 + std::abs(ll))) break;
        prev = ll;
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0, s1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k + c];
                s1 += resp[i * k + c] * x[i];
            }
            if (nk < 1e-10) {
                fit.weights[c] = 1e-10;
                continue;
            }
            const double mu = s1 / nk;
            double s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) s2 += resp[i * k + c] * (x[i] - mu) * (x[i] - mu);
            fit.means[c] = mu;
            fit.variances[c] = std::max(s2 / nk, kGmmVarianceFloor);
            fit.weights[c] = nk / static_cast<double>(n);
        }
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fit.means[a] < fit.means[b]; });
    GmmFit sorted = fit;
    for (std::size_t c = 0; c < k; ++c) {
        sorted.means[c] = fit.means[order[c]];
        sorted.variances[c] = fit.variances[order[c]];
        sorted.weights[c] = fit.weights[order[c]];
    }
    return sorted;
}

} // namespace

ModeFit offset_modes(const std::vector<double>& offsets, int max_components, std::uint64_t seed) {
    if (offsets.size() < 4) throw ValidationError("offset_modes needs at least 4 offsets");
    if (max_components < 1) throw ValidationError("max_components must be positive");
    const std::size_t n = offsets.size();
    std::vector<double> sorted = offsets;
    std::sort(sorted.begin(), sorted.end());
    const double var = std::max(stddev(offsets) * stddev(offsets), kGmmVarianceFloor);

    ModeFit out;
    for (int k = 1; k <= max_components; ++k) {
        GmmFit best;
        best.log_lik = -std::numeric_limits<double>::infinity();
        for (int r = 0; r < kGmmRestarts; ++r) {
            std::vector<double> init(static_cast<std::size_t>(k));
            if (r == 0) {
                for (int c = 0; c < k; ++c) init[static_cast<std::size_t>(c)] = quantile_sorted(sorted, (c + 0.5) / k);
            } else {
                Rng rng = Rng::substream(mix(seed, static_cast<std::uint64_t>(k)), static_cast<std::uint64_t>(r));
                for (auto& m : init) m = offsets[rng.below(n)];
            }
            GmmFit f = run_em(offsets, std::move(init), var);
            if (f.log_lik > best.log_lik) best = std::move(f);
        }
        best.bic = -2.0 * best.log_lik + (3.0 * k - 1.0) * std::log(static_cast<double>(n));
        out.table.push_back(best);
    }
    out.best = out.table.front();
    for (const auto& f : out.table)
        if (f.bic < out.best.bic) out.best = f;
    return out;
}

int matched_modes(const std::vector<double>& a, const std::vector<double>& b, double tolerance) {
    auto count = [&](const std::vector<double>& from, const std::vector<double>& to) {
        int c = 0;
        for (double x : from)
            for (double y : to)
                if (std::abs(std::abs(x) - std::abs(y)) <= tolerance) {
                    ++c;
                    break;
                }
        return c;
    };
    return std::max(count(a, b), count(b, a));
}

double mode_coincidence_test(const std::vector<double>& modes_a, const std::vector<double>& modes_b,
                             double tolerance_days, int n_mc, std::uint64_t seed) {
    if (modes_a.empty() || modes_b.empty()) throw ValidationError("mode sets must be nonempty");
    if (n_mc < 1) throw ValidationError("n_mc must be positive");
    const int observed = matched_modes(modes_a, modes_b, tolerance_days);
    const std::size_t N = static_cast<std::size_t>(n_mc);
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (N + kChunk - 1) / kChunk;
    std::vector<std::size_t> hits(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
        Rng rng = Rng::substream(seed, c);
        std::vector<double> a(modes_a.size()), b(modes_b.size());
        const std::size_t end = std::min(N, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            for (auto& v : a) v = 1.0 + static_cast<double>(rng.below(kMaxOffset));
            for (auto& v : b) v = 1.0 + static_cast<double>(rng.below(kMaxOffset));
            hits[c] += matched_modes(a, b, tolerance_days) >= observed;
        }
    });
    const std::size_t total = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
    return (1.0 + static_cast<double>(total)) / (static_cast<double>(N) + 1.0);
}

HeadTensors random_head(int d, int d_head, Rng& rng) {
    HeadTensors h;
    h.Wq.resize(d_head, d);
    h.Wk.resize(d_head, d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < d_head; ++i)
        for (int j = 0; j < d; ++j) h.Wq(i, j) = s * rng.normal();
    for (int i = 0; i < d_head; ++i)
        for (int j = 0; j < d; ++j) h.Wk(i, j) = s * rng.normal();
    return h;
}

HeadTensors plant_offset_head(const Eigen::MatrixXd& mean_acts, int c, double target_z, int d_head, Rng& rng) {
    if (mean_acts.rows() != kDays) throw ValidationError("mean activations must have 365 rows");
    if (c == 0 || std::abs(c) > kMaxOffset) throw ValidationError("planted offset must be nonzero and within 182");
    const int d = static_cast<int>(mean_acts.cols());
    HeadTensors base = random_head(d, d_head, rng);

    // Blind the query side to the seasonal directions of the means (their
    // first two annual harmonics). A smooth component there adds a broad bump
    // to every offset and caps the reachable z-score.
    const Eigen::MatrixXd centered = mean_acts.rowwise() - mean_acts.colwise().mean();
    Eigen::MatrixXd F(kDays, 4);
    for (int j = 0; j < kDays; ++j)
        for (int m = 1; m <= 2; ++m) {
            const double a = 2.0 * std::numbers::pi * m * (j + 1) / kDays;
            F(j, 2 * (m - 1)) = std::sin(a);
            F(j, 2 * (m - 1) + 1) = std::cos(a);
        }
    const Eigen::MatrixXd seasonal = F.transpose() * centered;  // 4 x d
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(seasonal, Eigen::ComputeThinV);
    Eigen::Index r = 0;
    while (r < svd.singularValues().size() && svd.singularValues()(r) > 1e-10 * svd.singularValues()(0)) ++r;
    const Eigen::MatrixXd V = svd.matrixV().leftCols(r);
    base.Wq -= (base.Wq * V) * V.transpose();

    // Y T ~= Y_shift where row j of Y_shift is row j + c of Y.
    Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(kDays, d);
    for (int j = 0; j < kDays; ++j)
        if (j + c >= 0 && j + c < kDays) shifted.row(j) = mean_acts.row(j + c);
    const Eigen::MatrixXd T = mean_acts.completeOrthogonalDecomposition().solve(shifted);
    const Eigen::MatrixXd Wk_plant = base.Wq * T.transpose();

    HeadTensors plant = base;
    plant.Wk = Wk_plant;
    const Eigen::MatrixXd M0 = qk_matrix(mean_acts, base);
    const Eigen::MatrixXd M1 = qk_matrix(mean_acts, plant);
    auto z_at = [&](double a) {
        const OffsetProfile p = profile_from_matrix(M0 + a * M1);
        return p.degenerate ? 0.0 : p.z_at(c);
    };

    double lo = 0.0, hi = 1.0;
    while (z_at(hi) < target_z) {
        hi *= 2.0;
        if (hi > 1e12) throw NumericalError("planted offset cannot reach the requested z-score");
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (z_at(mid) < target_z ? lo : hi) = mid;
    }
    HeadTensors out = base;
    out.Wk = base.Wk + hi * Wk_plant;
    return out;
}

std::vector<HeadTensors> load_heads(const ActivationCache& cache) {
    const auto& wq = cache.get("qk.wq");
    const auto& wk = cache.get("qk.wk");
    if (wq.dims.size() != 3 || wq.dims != wk.dims) throw ValidationError("qk.wq and qk.wk must share H x d_head x d dims");
    const auto H = static_cast<Eigen::Index>(wq.dims[0]), dh = static_cast<Eigen::Index>(wq.dims[1]),
               d = static_cast<Eigen::Index>(wq.dims[2]);
    std::vector<std::int64_t> lh;
    if (cache.contains("qk.layer_head")) {
        lh = cache.get("qk.layer_head").to_i64();
        if (static_cast<Eigen::Index>(lh.size()) != 2 * H) throw ValidationError("qk.layer_head must be H x 2");
    }
    const Eigen::VectorXd q = wq.to_vector(), k = wk.to_vector();
    std::vector<HeadTensors> heads(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
        auto& head = heads[static_cast<std::size_t>(h)];
        head.layer = lh.empty() ? 0 : static_cast<int>(lh[static_cast<std::size_t>(2 * h)]);
        head.head = lh.empty() ? static_cast<int>(h) : static_cast<int>(lh[static_cast<std::size_t>(2 * h + 1)]);
        head.Wq.resize(dh, d);
        head.Wk.resize(dh, d);
        for (Eigen::Index r = 0; r < dh; ++r)
            for (Eigen::Index c = 0; c < d; ++c) {
                head.Wq(r, c) = q((h * dh + r) * d + c);
                head.Wk(r, c) = k((h * dh + r) * d + c);
            }
    }
    return heads;
}

} // namespace msc
