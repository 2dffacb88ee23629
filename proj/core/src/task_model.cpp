#include "msc/task_model.hpp"

#include "msc/cache.hpp"
#include "msc/error.hpp"
#include "msc/stats.hpp"

#include <cmath>

namespace msc {

double Evaluation::accuracy() const {
    if (pred.empty()) throw ValidationError("accuracy of empty evaluation");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double Evaluation::mean_nll() const {
    if (nll.size() == 0) throw ValidationError("mean NLL of empty evaluation");
    return nll.mean();
}

Evaluation evaluate_hooked(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const Subspace& hook) {
    if (hook.k() == 0) return model.evaluate(X, labels);
    return model.evaluate(ablate_rows(X, hook), labels);
}

LinearSoftmaxModel::LinearSoftmaxModel(Eigen::MatrixXd A, Eigen::VectorXd b, double temperature)
    : A_(std::move(A)), b_(std::move(b)), T_(temperature) {
    if (A_.rows() < 2) throw ValidationError("model needs at least 2 classes");
    if (b_.size() != A_.rows()) throw ValidationError("bias length must match class count");
    if (!(T_ > 0)) throw ValidationError("temperature must be positive");
}

Eigen::MatrixXd LinearSoftmaxModel::logits(const Eigen::MatrixXd& X) const {
    if (X.cols() != A_.cols()) throw ValidationError("input width does not match model d");
    return ((X * A_.transpose()).rowwise() + b_.transpose()) / T_;
}

namespace {

void check_labels(const std::vector<int>& labels, Eigen::Index n, int classes) {
    if (static_cast<Eigen::Index>(labels.size()) != n) throw ValidationError("label count does not match rows");
    for (int y : labels)
        if (y < 0 || y >= classes) throw ValidationError("label out of range");
}

} // namespace

Evaluation LinearSoftmaxModel::evaluate(const Eigen::MatrixXd& X, const std::vector<int>& labels) const {
    check_labels(labels, X.rows(), n_classes());
    const Eigen::MatrixXd Z = logits(X);
    Evaluation ev;
    ev.labels = labels;
    ev.nll.resize(X.rows());
    ev.pred.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double m = Z.row(i).maxCoeff();
        const double lse = m + std::log((Z.row(i).array() - m).exp().sum());
        ev.nll(i) = lse - Z(i, labels[static_cast<std::size_t>(i)]);
        ev.pred[static_cast<std::size_t>(i)] = argmax(Z.row(i).transpose());
    }
    return ev;
}

Eigen::MatrixXd LinearSoftmaxModel::gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels) const {
    check_labels(labels, X.rows(), n_classes());
    Eigen::MatrixXd P = logits(X);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double m = P.row(i).maxCoeff();
        P.row(i) = (P.row(i).array() - m).exp().matrix();
        P.row(i) /= P.row(i).sum();
        P(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    return P * A_ / T_;
}

SyntheticMediatorModel::SyntheticMediatorModel(Subspace mediator, Eigen::MatrixXd readout, Eigen::VectorXd bias,
                                               double temperature)
    : LinearSoftmaxModel(readout * mediator.basis(), std::move(bias), temperature),
      mediator_(std::move(mediator)),
      readout_(std::move(readout)) {}

SyntheticMediatorModel SyntheticMediatorModel::from_cache(const ActivationCache& cache) {
    for (const char* name : {"mediator.basis", "readout", "readout.bias"})
        if (!cache.contains(name)) throw ValidationError(std::string("cache has no task model (missing ") + name + ")");
    if (!cache.meta().contains("temperature")) throw ValidationError("cache meta lacks model temperature");
    return SyntheticMediatorModel(Subspace::from_record(cache.get("mediator.basis")), cache.get("readout").to_matrix(),
                                  cache.get("readout.bias").to_vector(), cache.meta().at("temperature").get<double>());
}

Dataset load_dataset(const ActivationCache& cache) {
    Dataset ds;
    ds.X = cache.get("activations").to_matrix();
    for (auto v : cache.get("doy").to_i64()) {
        if (v < 1 || v > 365) throw ValidationError("doy label out of range");
        ds.doy.push_back(static_cast<int>(v));
    }
    if (static_cast<Eigen::Index>(ds.doy.size()) != ds.X.rows()) throw ValidationError("doy count does not match activations");
    if (cache.contains("labels")) {
        for (auto v : cache.get("labels").to_i64()) ds.labels.push_back(static_cast<int>(v));
        if (static_cast<Eigen::Index>(ds.labels.size()) != ds.X.rows())
            throw ValidationError("label count does not match activations");
    }
    return ds;
}

} // namespace msc
