#pragma once

#include "fraclab/barrier.hpp"
#include "fraclab/common.hpp"
#include "fraclab/io.hpp"
#include "fraclab/lab.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/minimize.hpp"
#include "fraclab/nonlocal.hpp"
#include "fraclab/potential.hpp"
#include "fraclab/quadrature.hpp"
#include "fraclab/setgeom.hpp"
