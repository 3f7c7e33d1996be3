#pragma once

#include "savers/checkpoint.hpp"
#include "savers/chipfile.hpp"
#include "savers/data_types.hpp"
#include "savers/datapipe.hpp"
#include "savers/errors.hpp"
#include "savers/grad_check.hpp"
#include "savers/metrics.hpp"
#include "savers/net.hpp"
#include "savers/ops.hpp"
#include "savers/pgm.hpp"
#include "savers/rng.hpp"
#include "savers/segment.hpp"
#include "savers/tensor.hpp"
#include "savers/trainer.hpp"
