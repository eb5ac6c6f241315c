#pragma once

#include "tofusion/camera.hpp"
#include "tofusion/config.hpp"
#include "tofusion/conv.hpp"
#include "tofusion/fusion_net.hpp"
#include "tofusion/io.hpp"
#include "tofusion/itof.hpp"
#include "tofusion/losses.hpp"
#include "tofusion/metrics.hpp"
#include "tofusion/optimizer.hpp"
#include "tofusion/prior.hpp"
#include "tofusion/raster.hpp"
#include "tofusion/reproject.hpp"
#include "tofusion/rng.hpp"
#include "tofusion/scene.hpp"
#include "tofusion/tensor.hpp"
#include "tofusion/train.hpp"
