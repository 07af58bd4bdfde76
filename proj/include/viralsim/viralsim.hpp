#ifndef VIRALSIM_VIRALSIM_HPP
#define VIRALSIM_VIRALSIM_HPP

#include "viralsim/rng.hpp"
#include "viralsim/geometry.hpp"
#include "viralsim/socialgraph.hpp"
#include "viralsim/channel.hpp"
#include "viralsim/routing.hpp"
#include "viralsim/protocol.hpp"
#include "viralsim/lowerbound.hpp"
#include "viralsim/harness.hpp"

#endif  // VIRALSIM_VIRALSIM_HPP
