#include "msc/synthetic.hpp"

#include "msc/cache.hpp"
#include "msc/error.hpp"
#include "msc/qk_twist.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"
#include "msc/subspace.hpp"

#include <cmath>
#include <numbers>

namespace msc {

void SyntheticSuiteSpec::validate() const {
    if (k_med < 1) throw ValidationError("k_med must be >= 1");
    if (k_med + 2 > d) throw ValidationError("k_med + 2 must not exceed d");
    if (n_classes < 2) throw ValidationError("n_classes must be >= 2");
    if (n_prompts < 10 * n_classes) throw ValidationError("n_prompts must be >= 10 * n_classes");
    if (!(noise >= 0) || !(snr_med >= 0) || !(snr_probe >= 0)) throw ValidationError("noise and SNRs must be >= 0");
    if (!(temperature > 0)) throw ValidationError("temperature must be positive");
    if (n_heads < 0 || d_head < 1) throw ValidationError("bad QK head shape");
    if (n_queries < 0 || query_positions < 2) throw ValidationError("bad query shape");
}

namespace {

Eigen::Vector2d circle(int doy) {
    const double a = 2.0 * std::numbers::pi * doy / kDays;
    return {std::sin(a), std::cos(a)};
}

} // namespace

ActivationCache generate_synthetic_suite(const SyntheticSuiteSpec& spec) {
    spec.validate();
    const int d = spec.d, k = spec.k_med, C = spec.n_classes, n = spec.n_prompts;

    // One Haar frame of rank k + 2 split into mediator and probe-signal rows,
    // so the two are orthogonal by construction.
    Rng frame_rng = Rng::substream(spec.seed, 0);
    const Subspace joint = haar_sample(d, k + 2, frame_rng);
    const Subspace mediator(joint.basis().topRows(k));
    const Subspace probe_signal(joint.basis().bottomRows(2));

    Rng readout_rng = Rng::substream(spec.seed, 1);
    Eigen::MatrixXd R(C, k);
    for (int i = 0; i < C; ++i)
        for (int j = 0; j < k; ++j) R(i, j) = readout_rng.normal();

    Rng s_rng = Rng::substream(spec.seed, 2);
    Eigen::MatrixXd S(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) S(i, j) = spec.snr_med * s_rng.normal();

    Rng noise_rng = Rng::substream(spec.seed, 3);
    Eigen::MatrixXd E(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) E(i, j) = spec.noise * noise_rng.normal();

    std::vector<std::int64_t> doy(static_cast<std::size_t>(n)), labels(static_cast<std::size_t>(n));
    Eigen::MatrixXd Z(n, 2);
    for (int i = 0; i < n; ++i) {
        doy[static_cast<std::size_t>(i)] = (i % kDays) + 1;
        Z.row(i) = circle((i % kDays) + 1).transpose();
        labels[static_cast<std::size_t>(i)] = argmax(R * S.row(i).transpose());
    }
    const Eigen::MatrixXd X =
        S * mediator.basis() + spec.snr_probe * Z * probe_signal.basis() + E;

    std::vector<int> counts(static_cast<std::size_t>(C), 0);
    for (auto y : labels) ++counts[static_cast<std::size_t>(y)];
    int rare = 0;
    for (int c = 1; c < C; ++c)
        if (counts[static_cast<std::size_t>(c)] < counts[static_cast<std::size_t>(rare)]) rare = c;
    Eigen::VectorXd bias = Eigen::VectorXd::Zero(C);
    bias(rare) = spec.fallback_bias;

    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(kDays, d);
    std::vector<int> per_day(kDays, 0);
    for (int i = 0; i < n; ++i) {
        means.row(i % kDays) += X.row(i);
        ++per_day[static_cast<std::size_t>(i % kDays)];
    }
    for (int t = 0; t < kDays; ++t) {
        if (per_day[static_cast<std::size_t>(t)] > 0)
            means.row(t) /= per_day[static_cast<std::size_t>(t)];
        else
            means.row(t) = spec.snr_probe * circle(t + 1).transpose() * probe_signal.basis();
    }

    ActivationCache cache;
    cache.put(TensorRecord::from_matrix("activations", X));
    cache.put(TensorRecord::from_i64("doy", doy));
    cache.put(TensorRecord::from_i64("labels", labels));
    cache.put(TensorRecord::from_matrix("doy_means", means));
    cache.put(mediator.to_record("mediator"));
    cache.put(probe_signal.to_record("probe_signal"));
    cache.put(TensorRecord::from_matrix("readout", R));
    cache.put(TensorRecord::from_vector("readout.bias", bias));

    if (spec.n_heads > 0) {
        Rng qk_rng = Rng::substream(spec.seed, 4);
        const auto H = static_cast<std::uint64_t>(spec.n_heads), dh = static_cast<std::uint64_t>(spec.d_head);
        std::vector<double> wq, wk;
        std::vector<std::int64_t> lh;
        for (int h = 0; h < spec.n_heads; ++h) {
            HeadTensors head;
            if (h == 0) {
                try {
                    head = plant_offset_head(means, spec.qk_offset, spec.qk_z, spec.d_head, qk_rng);
                } catch (const NumericalError&) {
                    throw ValidationError("cannot plant a QK offset ridge at z = " + std::to_string(spec.qk_z) +
                                          " for this suite (d too small); generate with n_heads = 0");
                }
            } else {
                head = random_head(d, spec.d_head, qk_rng);
            }
            for (int r = 0; r < spec.d_head; ++r)
                for (int c = 0; c < d; ++c) {
                    wq.push_back(head.Wq(r, c));
                    wk.push_back(head.Wk(r, c));
                }
            lh.push_back(0);
            lh.push_back(h);
        }
        const std::vector<std::uint64_t> dims{H, dh, static_cast<std::uint64_t>(d)};
        cache.put(TensorRecord{"qk.wq", dims, wq});
        cache.put(TensorRecord{"qk.wk", dims, wk});
        cache.put(TensorRecord::from_i64("qk.layer_head", lh, {H, 2}));
    }

    if (spec.n_queries > 0) {
        // Each query has query_positions token rows; the date tokens sit at
        // positions 1 and 3. Date tokens carry an off-manifold component whose
        // size grows with a latent difficulty that also drives the error.
        Rng q_rng = Rng::substream(spec.seed, 5);
        const int Q = spec.n_queries, P = spec.query_positions;
        Eigen::MatrixXd acts(Q * P, d);
        std::vector<std::int64_t> positions, wrong;
        Eigen::VectorXd err(Q);
        const double scale = std::max(spec.snr_probe, 1.0);
        for (int q = 0; q < Q; ++q) {
            const int day = 1 + static_cast<int>(q_rng.below(kDays));
            const double difficulty = q_rng.uniform();
            for (int p = 0; p < P; ++p) {
                Eigen::VectorXd g(d);
                for (int j = 0; j < d; ++j) g(j) = q_rng.normal();
                Eigen::VectorXd row;
                if (p == 1 || p == 3) {
                    row = means.row(day - 1).transpose() + 2.0 * scale * difficulty * g / g.norm();
                } else {
                    row = spec.noise * g;
                    row += scale * g.normalized();
                }
                acts.row(q * P + p) = row.transpose();
            }
            positions.push_back(1);
            positions.push_back(3);
            const double e = std::round(std::abs(q_rng.normal()) * 40.0 * difficulty * difficulty);
            err(q) = e;
            wrong.push_back(e > 7.0 ? 1 : 0);
        }
        cache.put(TensorRecord::from_matrix("queries", acts));
        cache.put(TensorRecord::from_i64("queries.positions", positions,
                                         {static_cast<std::uint64_t>(Q), 2}));
        cache.put(TensorRecord::from_vector("queries.error_days", err));
        cache.put(TensorRecord::from_i64("queries.wrong", wrong));
        cache.meta()["query_positions"] = P;
    }

    cache.meta()["d"] = d;
    cache.meta()["k_med"] = k;
    cache.meta()["n_classes"] = C;
    cache.meta()["n_prompts"] = n;
    cache.meta()["snr_med"] = spec.snr_med;
    cache.meta()["snr_probe"] = spec.snr_probe;
    cache.meta()["noise"] = spec.noise;
    cache.meta()["temperature"] = spec.temperature;
    cache.meta()["fallback_bias"] = spec.fallback_bias;
    cache.meta()["seed"] = spec.seed;
    cache.meta()["model"] = "synthetic-planted-mediator";
    cache.meta()["layer"] = 0;
    cache.meta()["prompt_set"] = "synthetic";
    return cache;
}

} // namespace msc
