#pragma once

#include "sma/error.hpp"
#include "sma/image.hpp"
#include "sma/image_io.hpp"
#include "sma/filters.hpp"
#include "sma/frequency.hpp"
#include "sma/fov.hpp"
#include "sma/aponeurosis.hpp"
#include "sma/orientation.hpp"
#include "sma/architecture.hpp"
#include "sma/pipeline.hpp"
#include "sma/config.hpp"
#include "sma/validation.hpp"
