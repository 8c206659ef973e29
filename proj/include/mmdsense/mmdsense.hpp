#pragma once

#include "mmdsense/ard_kernel.hpp"
#include "mmdsense/commands.hpp"
#include "mmdsense/config.hpp"
#include "mmdsense/embedding_store.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/mmd_core.hpp"
#include "mmdsense/numeric.hpp"
#include "mmdsense/parallel.hpp"
#include "mmdsense/permutation_test.hpp"
#include "mmdsense/random.hpp"
#include "mmdsense/sense_analysis.hpp"
#include "mmdsense/serialization.hpp"
#include "mmdsense/synthetic.hpp"
#include "mmdsense/variable_selection.hpp"
