#ifndef EVOHOM_EVOHOM_HPP
#define EVOHOM_EVOHOM_HPP

#include "analytic.hpp"
#include "assembly.hpp"
#include "coefficient.hpp"
#include "error.hpp"
#include "gauss.hpp"
#include "homogenisation.hpp"
#include "lab.hpp"
#include "material_law.hpp"
#include "mesh.hpp"
#include "solver.hpp"
#include "space.hpp"
#include "timecore.hpp"

#endif  // EVOHOM_EVOHOM_HPP
