#ifndef STAGECCD_STAGECCD_HPP
#define STAGECCD_STAGECCD_HPP

#include "stageccd/errors.hpp"
#include "stageccd/version.hpp"

#include "stageccd/structural/stage_params.hpp"
#include "stageccd/structural/mesh.hpp"
#include "stageccd/structural/shell_element.hpp"
#include "stageccd/structural/assembly.hpp"
#include "stageccd/structural/modal.hpp"
#include "stageccd/structural/mode_shape.hpp"
#include "stageccd/structural/export.hpp"

#include "stageccd/optim/cobyla.hpp"
#include "stageccd/geometry/geometry_optimizer.hpp"
#include "stageccd/placement/placement.hpp"

#include "stageccd/plant/frequency_response.hpp"
#include "stageccd/plant/plant.hpp"
#include "stageccd/control/controller.hpp"

#include "stageccd/pipeline/config.hpp"
#include "stageccd/pipeline/pipeline.hpp"

#endif  // STAGECCD_STAGECCD_HPP
