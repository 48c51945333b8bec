#pragma once

// Everything in one include.

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/core/text.hpp"
#include "ews/course_data.hpp"
#include "ews/design_matrix.hpp"
#include "ews/staging.hpp"
#include "ews/mixture.hpp"
#include "ews/learners/learner.hpp"
#include "ews/harness.hpp"
#include "ews/config.hpp"
