#pragma once

#include "nlsr/cache.hpp"
#include "nlsr/config.hpp"
#include "nlsr/error.hpp"
#include "nlsr/experiments.hpp"
#include "nlsr/initial_data.hpp"
#include "nlsr/integrators.hpp"
#include "nlsr/method.hpp"
#include "nlsr/phi.hpp"
#include "nlsr/relaxation.hpp"
#include "nlsr/spectral.hpp"
#include "nlsr/study.hpp"
#include "nlsr/verify.hpp"
#include "nlsr/version.hpp"
