#include "bsp/pipeline.hpp"

namespace bsp {

PreparedData prepare(const MortalitySurface& surface, const BasisSet& basis, double initial_variance) {
    PreparedData data;
    const std::vector<double> ages = surface.age_values();
    data.design = design_matrix(basis, ages);
    data.obs = surface.observations();
    data.lags = surface.lags();
    data.initial = initial_belief_from_data(data.design, data.obs, initial_variance);
    return data;
}

StateSpaceModel build_model(const PreparedData& data, const CorrelationPair& correlations,
                            const HyperParams& hp) {
    return assemble(data.design, correlations, hp, data.lags, data.initial);
}

SmoothedSurface run_smoother(const PreparedData& data, const CorrelationPair& correlations,
                             const HyperParams& hp) {
    SmoothedSurface out;
    out.model = build_model(data, correlations, hp);
    out.filtered = filter(out.model, data.obs);
    out.smoothed = smooth(out.model, out.filtered);
    return out;
}

} // namespace bsp
