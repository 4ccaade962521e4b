#pragma once

#include "kinkzeta/errors.hpp"
#include "kinkzeta/special_functions.hpp"
#include "kinkzeta/quadrature.hpp"
#include "kinkzeta/spin_chain.hpp"
#include "kinkzeta/phi4.hpp"
#include "kinkzeta/semiclassics.hpp"
#include "kinkzeta/m0_elliptic.hpp"
#include "kinkzeta/io.hpp"
#include "kinkzeta/commands.hpp"
