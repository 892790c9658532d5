#pragma once

#include "avp/camera.hpp"
#include "avp/image.hpp"
#include "avp/primitives.hpp"

namespace avp {

// Independent dense-quadrature evaluator of the same saturating integral the
// engine discretizes. Deliberately shares no marching, intersection, or
// interpolation code with the engine; it exists to cross-check `march`.
struct OracleOutput {
    Image rgb;    // 3 channels
    Image alpha;  // 1 channel
};

OracleOutput oracle_render(const PrimitiveSet& set, const Camera& camera, int sample_count,
                           const Vec3& background = {0, 0, 0});

}  // namespace avp
