// Convenience umbrella for the whole library.
#pragma once

#include "umarkov/ergodicity.hpp"
#include "umarkov/errors.hpp"
#include "umarkov/io.hpp"
#include "umarkov/models.hpp"
#include "umarkov/oracle.hpp"
#include "umarkov/parallel.hpp"
#include "umarkov/rng.hpp"
#include "umarkov/selection.hpp"
#include "umarkov/semigroup.hpp"
#include "umarkov/statespace.hpp"
