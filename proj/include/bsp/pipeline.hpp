#pragma once

#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"
#include "bsp/data.hpp"
#include "bsp/kalman.hpp"
#include "bsp/statespace.hpp"

#include <vector>

namespace bsp {

/// Everything about a surface that does not depend on the hyperparameters.
struct PreparedData {
    DesignMatrix design;
    ObservationSeries obs;
    std::vector<double> lags;
    GaussianBelief initial;
};

PreparedData prepare(const MortalitySurface& surface, const BasisSet& basis,
                     double initial_variance = 10.0);

StateSpaceModel build_model(const PreparedData& data, const CorrelationPair& correlations,
                            const HyperParams& hp);

struct SmoothedSurface {
    StateSpaceModel model;
    FilterResult filtered;
    SmootherResult smoothed;
};

SmoothedSurface run_smoother(const PreparedData& data, const CorrelationPair& correlations,
                             const HyperParams& hp);

} // namespace bsp
