#pragma once

#include "msc/subspace.hpp"

#include <Eigen/Dense>

#include <vector>

namespace msc {

class ActivationCache;

struct Evaluation {
    Eigen::VectorXd nll;      // NLL of the correct class per row
    std::vector<int> pred;    // argmax class per row, ties to the lowest index
    std::vector<int> labels;

    double accuracy() const;
    double mean_nll() const;
};

// Differentiable classifier over activations at the probed site.
class TaskModel {
public:
    virtual ~TaskModel() = default;
    virtual int d() const = 0;
    virtual int n_classes() const = 0;
    virtual Evaluation evaluate(const Eigen::MatrixXd& X, const std::vector<int>& labels) const = 0;
    // Row i is dNLL_i / dx_i.
    virtual Eigen::MatrixXd gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels) const = 0;
};

// evaluate(ablate_rows(X, hook)); the empty hook evaluates X unchanged.
Evaluation evaluate_hooked(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const Subspace& hook);

// Softmax over (A x + b) / T.
class LinearSoftmaxModel : public TaskModel {
public:
    LinearSoftmaxModel(Eigen::MatrixXd A, Eigen::VectorXd b, double temperature);

    int d() const override { return static_cast<int>(A_.cols()); }
    int n_classes() const override { return static_cast<int>(A_.rows()); }
    Evaluation evaluate(const Eigen::MatrixXd& X, const std::vector<int>& labels) const override;
    Eigen::MatrixXd gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels) const override;

    const Eigen::MatrixXd& weights() const { return A_; }
    const Eigen::VectorXd& bias() const { return b_; }
    double temperature() const { return T_; }

private:
    Eigen::MatrixXd logits(const Eigen::MatrixXd& X) const;

    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    double T_;
};

// f(x) = softmax((R U_M x + b) / T): output depends on x only through U_M x.
class SyntheticMediatorModel : public LinearSoftmaxModel {
public:
    SyntheticMediatorModel(Subspace mediator, Eigen::MatrixXd readout, Eigen::VectorXd bias, double temperature);

    // Reads "mediator.basis", "readout", "readout.bias" and meta "temperature".
    static SyntheticMediatorModel from_cache(const ActivationCache& cache);

    const Subspace& mediator() const { return mediator_; }
    const Eigen::MatrixXd& readout() const { return readout_; }

private:
    Subspace mediator_;
    Eigen::MatrixXd readout_;
};

struct Dataset {
    Eigen::MatrixXd X;       // n x d activations
    std::vector<int> doy;    // 1..365
    std::vector<int> labels; // answer classes; empty when the cache has none
};

// Reads "activations", "doy" and (if present) "labels".
Dataset load_dataset(const ActivationCache& cache);

} // namespace msc
