#pragma once

// Umbrella header for the rotation-equivariant quaternion network library.

#include "reqnn/certify.hpp"
#include "reqnn/cloud_io.hpp"
#include "reqnn/core.hpp"
#include "reqnn/dataset.hpp"
#include "reqnn/geometry.hpp"
#include "reqnn/layers.hpp"
#include "reqnn/network.hpp"
#include "reqnn/presets.hpp"
#include "reqnn/q2r.hpp"
#include "reqnn/quaternion.hpp"
#include "reqnn/rotor.hpp"
#include "reqnn/tensor.hpp"
#include "reqnn/train.hpp"
