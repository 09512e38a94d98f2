#pragma once

#include "alm/balance_sheet.hpp"
#include "alm/errors.hpp"
#include "alm/estimators.hpp"
#include "alm/io.hpp"
#include "alm/market.hpp"
#include "alm/mortality.hpp"
#include "alm/optimizer.hpp"
#include "alm/parallel.hpp"
#include "alm/rng.hpp"
#include "alm/study.hpp"
