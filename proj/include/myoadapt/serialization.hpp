#pragma once

#include <json.hpp>

#include <Eigen/Core>

#include "myoadapt/hl2l.hpp"
#include "myoadapt/lssvm.hpp"
#include "myoadapt/mkal.hpp"
#include "myoadapt/multi_adapt.hpp"

namespace myoadapt {

using Json = nlohmann::json;

// {"rows": r, "cols": c, "data": [row-major values]}. Doubles are written
// with round-trip precision.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const Json& j);

// {"format": "myoadapt.multiclass.v1", "id", "kernel", "C", "class_count",
//  "train_X", "alphas", "biases"}
Json model_to_json(const MulticlassModel& m);
MulticlassModel multiclass_from_json(const Json& j);

// Models that use sources store them by id; loading resolves the ids
// against `available`.
Json model_to_json(const MultiAdaptModel& m);
MultiAdaptModel multi_adapt_from_json(const Json& j, const SourceSet& available);

Json model_to_json(const MkalModel& m);
MkalModel mkal_from_json(const Json& j, const SourceSet& available);

Json model_to_json(const Hl2lModel& m);
Hl2lModel hl2l_from_json(const Json& j, const SourceSet& available);

}  // namespace myoadapt
