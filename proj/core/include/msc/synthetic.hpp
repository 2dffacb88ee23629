#pragma once

#include <cstdint>

namespace msc {

class ActivationCache;

struct SyntheticSuiteSpec {
    int d = 256;
    int k_med = 4;
    int n_classes = 8;
    int n_prompts = 3650;
    double snr_med = 3.0;
    double snr_probe = 3.0;
    double noise = 0.3;          // isotropic noise standard deviation
    double temperature = 30.0;   // readout softmax temperature
    double fallback_bias = 1.0;  // logit bias on the least frequent class
    std::uint64_t seed = 7;

    int n_heads = 8;
    int d_head = 16;
    int qk_offset = 30;
    double qk_z = 5.0;

    int n_queries = 240;
    int query_positions = 6;

    void validate() const;
};

// Tensors: activations, doy, labels, doy_means, mediator.basis,
// probe_signal.basis, readout, readout.bias, qk.wq, qk.wk, qk.layer_head,
// queries, queries.positions, queries.error_days, queries.wrong.
ActivationCache generate_synthetic_suite(const SyntheticSuiteSpec& spec);

} // namespace msc
