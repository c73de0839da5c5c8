#include "bsp/kalman.hpp"

#include "bsp/errors.hpp"

#include <cmath>
#include <string>

namespace bsp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kJitter = 1e-10;

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

void check_dimensions(const StateSpaceModel& model, const ObservationSeries& obs) {
    if (obs.rows() != model.obs_dim()) {
        throw InputError("observation vectors have " + std::to_string(obs.rows()) +
                         " rows, model expects " + std::to_string(model.obs_dim()));
    }
    if (obs.observed.rows() != obs.values.rows() || obs.observed.cols() != obs.values.cols()) {
        throw InputError("missing-data mask does not match the observation grid");
    }
    if (static_cast<std::size_t>(obs.steps()) != model.time_points()) {
        throw InputError("observation series has " + std::to_string(obs.steps()) +
                         " time points, model time grid has " + std::to_string(model.time_points()));
    }
    if (model.T.size() != model.lags.size() || model.Q.size() != model.lags.size()) {
        throw InputError("model must carry one transition and one noise matrix per lag");
    }
    if (model.H.size() != model.obs_dim()) {
        throw InputError("observation noise must have one variance per row");
    }
}

IndexList observed_rows(const ObservationSeries& obs, Index s) {
    IndexList rows;
    for (Index i = 0; i < obs.rows(); ++i) {
        if (obs.observed(i, s)) {
            if (!std::isfinite(obs.values(i, s))) {
                throw InputError("non-finite observation marked observed at row " + std::to_string(i) +
                                 ", time step " + std::to_string(s));
            }
            rows.push_back(i);
        }
    }
    return rows;
}

// Columns of Z with any nonzero entry: the state coordinates observations load on.
IndexList loading_columns(const Eigen::MatrixXd& z) {
    IndexList cols;
    for (Index j = 0; j < z.cols(); ++j) {
        if ((z.col(j).array() != 0.0).any()) {
            cols.push_back(j);
        }
    }
    return cols;
}

// Collapse of the observed rows onto the loading columns, cached per missing-data pattern.
struct Reduction {
    IndexList rows;
    bool usable = false;
    Eigen::MatrixXd loadings;      // G = Z[rows, cols]
    Eigen::VectorXd inv_h;         // 1 / H[rows]
    Eigen::MatrixXd reducer;       // (G' H^-1 G)^-1 G' H^-1
    Eigen::MatrixXd noise;         // (G' H^-1 G)^-1
    double constant = 0.0;         // likelihood terms of the discarded residual space
};

void build_reduction(const StateSpaceModel& model, const IndexList& cols, const IndexList& rows,
                     Reduction& out) {
    out.rows = rows;
    out.usable = false;
    const auto k = static_cast<Index>(rows.size());
    const auto c = static_cast<Index>(cols.size());
    if (k <= c || c == 0) {
        return;
    }
    out.loadings = model.Z(rows, cols);
    out.inv_h = model.H(rows).cwiseInverse();
    const Eigen::MatrixXd info = out.loadings.transpose() * out.inv_h.asDiagonal() * out.loadings;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
        return;
    }
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    if (diag.minCoeff() <= 1e-8 * diag.maxCoeff()) {
        return;
    }
    out.noise = llt.solve(Eigen::MatrixXd::Identity(c, c));
    symmetrize(out.noise);
    out.reducer = out.noise * out.loadings.transpose() * out.inv_h.asDiagonal();
    const double logdet_info = 2.0 * diag.array().log().sum();
    const double logdet_h = -out.inv_h.array().log().sum();
    out.constant = -0.5 * logdet_h - 0.5 * logdet_info - 0.5 * static_cast<double>(k - c) * kLog2Pi;
    out.usable = true;
}

Eigen::LLT<Eigen::MatrixXd> factor_innovation(Eigen::MatrixXd& f, std::size_t step) {
    Eigen::LLT<Eigen::MatrixXd> llt(f);
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    f.diagonal().array() += kJitter;
    llt.compute(f);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("innovation covariance is not positive definite", step);
    }
    return llt;
}

void predict_in_place(const StateSpaceModel& model, std::size_t s, Eigen::VectorXd& mean,
                      Eigen::MatrixXd& cov) {
    mean = model.T[s] * mean;
    cov = propagate_covariance(model.T[s], cov, model.block_size);
    cov += model.Q[s];
    symmetrize(cov);
}

double run_filter(const StateSpaceModel& model, const ObservationSeries& obs,
                  const FilterOptions& options, FilterResult* out) {
    check_dimensions(model, obs);
    const Index m = model.state_dim();
    const IndexList cols = loading_columns(model.Z);
    const auto n = static_cast<Index>(obs.steps());

    Eigen::VectorXd mean = model.initial.mean;
    Eigen::MatrixXd cov = model.initial.cov;
    Reduction reduction;
    bool have_reduction = false;
    double total = 0.0;

    if (out) {
        out->steps.clear();
        out->steps.resize(static_cast<std::size_t>(n));
    }

    for (Index s = 0; s < n; ++s) {
        const auto step = static_cast<std::size_t>(s);
        FilterStep* record = out ? &out->steps[step] : nullptr;
        if (record) {
            record->predicted = {mean, cov};
        }

        const IndexList rows = observed_rows(obs, s);
        double step_loglik = 0.0;
        if (!rows.empty()) {
            const Eigen::VectorXd y = obs.values.col(s)(rows);
            bool reduced = false;
            if (options.collapse) {
                if (!have_reduction || reduction.rows != rows) {
                    build_reduction(model, cols, rows, reduction);
                    have_reduction = true;
                }
                reduced = reduction.usable;
            }

            Eigen::VectorXd target;
            Eigen::MatrixXd cov_loading;   // P * loading'
            Eigen::MatrixXd f;
            Eigen::MatrixXd loading;
            double extra = 0.0;
            if (reduced) {
                target = reduction.reducer * y;
                const Eigen::VectorXd residual = y - reduction.loadings * target;
                extra = reduction.constant -
                        0.5 * residual.dot(reduction.inv_h.cwiseProduct(residual));
                cov_loading = cov(Eigen::all, cols);
                f = cov(cols, cols) + reduction.noise;
                if (record) {
                    loading = Eigen::MatrixXd::Zero(static_cast<Index>(cols.size()), m);
                    for (std::size_t c = 0; c < cols.size(); ++c) {
                        loading(static_cast<Index>(c), cols[c]) = 1.0;
                    }
                }
            } else {
                target = y;
                loading = model.Z(rows, Eigen::all);
                cov_loading = cov * loading.transpose();
                f = loading * cov_loading;
                f.diagonal() += model.H(rows);
            }
            symmetrize(f);

            const Eigen::VectorXd predicted_obs =
                reduced ? Eigen::VectorXd(mean(cols)) : Eigen::VectorXd(loading * mean);
            const Eigen::VectorXd v = target - predicted_obs;
            const auto llt = factor_innovation(f, step);
            const Eigen::VectorXd finv_v = llt.solve(v);
            const Eigen::MatrixXd gain = llt.solve(cov_loading.transpose()).transpose();
            const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
            step_loglik = -0.5 * (static_cast<double>(v.size()) * kLog2Pi + logdet + v.dot(finv_v)) + extra;

            mean += cov_loading * finv_v;
            cov.noalias() -= gain * cov_loading.transpose();
            symmetrize(cov);

            if (record) {
                record->innovation = v;
                record->innovation_cov = f;
                record->observed_count = static_cast<Index>(rows.size());
                record->reduced = reduced;
                record->rows = rows;
                if (reduced) {
                    record->reducer = reduction.reducer;
                }
                record->loading = std::move(loading);
                record->innovation_inv = llt.solve(Eigen::MatrixXd::Identity(f.rows(), f.cols()));
                record->gain = gain;
            }
        } else if (record) {
            record->loading = Eigen::MatrixXd::Zero(0, m);
            record->innovation = Eigen::VectorXd::Zero(0);
            record->innovation_cov = Eigen::MatrixXd::Zero(0, 0);
            record->innovation_inv = Eigen::MatrixXd::Zero(0, 0);
            record->gain = Eigen::MatrixXd::Zero(m, 0);
        }

        total += step_loglik;
        if (record) {
            record->filtered = {mean, cov};
            record->loglik = step_loglik;
        }
        if (s + 1 < n) {
            predict_in_place(model, step, mean, cov);
        }
    }
    if (out) {
        out->loglik = total;
    }
    return total;
}

// Effective observation for step s of `obs`, in the space used by the recorded filter step.
Eigen::VectorXd effective_observation(const FilterStep& step, const ObservationSeries& obs, Index s) {
    Eigen::VectorXd y(static_cast<Index>(step.rows.size()));
    for (std::size_t r = 0; r < step.rows.size(); ++r) {
        const Index row = step.rows[r];
        if (!obs.observed(row, s)) {
            throw InputError("missing-data pattern differs from the filtered series at time step " +
                             std::to_string(s));
        }
        y[static_cast<Index>(r)] = obs.values(row, s);
    }
    return step.reduced ? Eigen::VectorXd(step.reducer * y) : y;
}

} // namespace

Eigen::MatrixXd propagate_covariance(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& cov,
                                     int block_size) {
    const Index m = cov.rows();
    if (block_size <= 0 || m % block_size != 0) {
        return transition * cov * transition.transpose();
    }
    const Index b = block_size;
    Eigen::MatrixXd left(m, m);
    for (Index i = 0; i < m; i += b) {
        left.middleRows(i, b).noalias() = transition.block(i, i, b, b) * cov.middleRows(i, b);
    }
    Eigen::MatrixXd result(m, m);
    for (Index j = 0; j < m; j += b) {
        result.middleCols(j, b).noalias() = left.middleCols(j, b) * transition.block(j, j, b, b).transpose();
    }
    return result;
}

FilterResult filter(const StateSpaceModel& model, const ObservationSeries& obs, const FilterOptions& options) {
    FilterResult result;
    run_filter(model, obs, options, &result);
    return result;
}

double loglik(const StateSpaceModel& model, const ObservationSeries& obs, const FilterOptions& options) {
    return run_filter(model, obs, options, nullptr);
}

SmootherResult smooth(const StateSpaceModel& model, const FilterResult& filtered) {
    const auto n = filtered.steps.size();
    if (n != model.time_points()) {
        throw InputError("filter result length does not match the model time grid");
    }
    const Index m = model.state_dim();
    SmootherResult result;
    result.smoothed.resize(n);
    result.r.resize(n);
    result.V.resize(n);

    Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t idx = n; idx-- > 0;) {
        const FilterStep& step = filtered.steps[idx];
        if (step.predicted.mean.size() != m) {
            throw InputError("filter result state dimension does not match the model");
        }
        const bool last = idx + 1 == n;
        Eigen::VectorXd r_prev;
        Eigen::MatrixXd V_prev;
        if (last) {
            r_prev = Eigen::VectorXd::Zero(m);
            V_prev = Eigen::MatrixXd::Zero(m, m);
        } else {
            const Eigen::MatrixXd& t = model.T[idx];
            r_prev = t.transpose() * r;
            V_prev = propagate_covariance(t.transpose(), V, model.block_size);
        }
        if (step.loading.rows() > 0) {
            const Eigen::MatrixXd& z = step.loading;
            // L_s = T_s (I - K Z): fold the (I - K Z) factor into the propagated r and V.
            if (!last) {
                const Eigen::VectorXd kr = step.gain.transpose() * r_prev;
                r_prev -= z.transpose() * kr;
                Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
                a.noalias() -= step.gain * z;
                V_prev = a.transpose() * V_prev * a;
            }
            r_prev += z.transpose() * (step.innovation_inv * step.innovation);
            V_prev += z.transpose() * step.innovation_inv * z;
        }
        symmetrize(V_prev);

        const Eigen::MatrixXd& p = step.predicted.cov;
        GaussianBelief belief;
        belief.mean = step.predicted.mean + p * r_prev;
        belief.cov = p - p * V_prev * p;
        symmetrize(belief.cov);
        result.smoothed[idx] = std::move(belief);
        result.r[idx] = r_prev;
        result.V[idx] = V_prev;
        r = std::move(r_prev);
        V = std::move(V_prev);
    }
    return result;
}

std::vector<Eigen::VectorXd> smoothed_means(const StateSpaceModel& model, const FilterResult& filtered,
                                            const ObservationSeries& obs) {
    check_dimensions(model, obs);
    const auto n = filtered.steps.size();
    if (n != static_cast<std::size_t>(obs.steps())) {
        throw InputError("filter result length does not match the observation series");
    }
    const Index m = model.state_dim();
    std::vector<Eigen::VectorXd> predicted(n);
    std::vector<Eigen::VectorXd> innovations(n);
    Eigen::VectorXd mean = model.initial.mean;
    for (std::size_t s = 0; s < n; ++s) {
        const FilterStep& step = filtered.steps[s];
        predicted[s] = mean;
        if (step.loading.rows() > 0) {
            const Eigen::VectorXd y = effective_observation(step, obs, static_cast<Index>(s));
            innovations[s] = y - step.loading * mean;
            mean += step.gain * innovations[s];
        }
        if (s + 1 < n) {
            mean = model.T[s] * mean;
        }
    }

    std::vector<Eigen::VectorXd> result(n);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
    for (std::size_t idx = n; idx-- > 0;) {
        const FilterStep& step = filtered.steps[idx];
        Eigen::VectorXd r_prev = Eigen::VectorXd::Zero(m);
        if (idx + 1 < n) {
            r_prev = model.T[idx].transpose() * r;
        }
        if (step.loading.rows() > 0) {
            if (idx + 1 < n) {
                r_prev -= step.loading.transpose() * (step.gain.transpose() * r_prev);
            }
            r_prev += step.loading.transpose() * (step.innovation_inv * innovations[idx]);
        }
        result[idx] = predicted[idx] + step.predicted.cov * r_prev;
        r = std::move(r_prev);
    }
    return result;
}

GaussianBelief project_to_surface(const StateSpaceModel& model, const GaussianBelief& belief) {
    if (belief.mean.size() != model.state_dim()) {
        throw InputError("belief dimension does not match the model state");
    }
    GaussianBelief f;
    f.mean = model.Z * belief.mean;
    f.cov = model.Z * belief.cov * model.Z.transpose();
    symmetrize(f.cov);
    return f;
}

} // namespace bsp
