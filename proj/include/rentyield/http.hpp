#pragma once

// Single point of inclusion for cpp-httplib.

#include "httplib.h"

// <resolv.h> defines `_res` as a macro, which clashes with identifiers in
// Eigen's product kernels when Eigen is included afterwards.
#ifdef _res
#undef _res
#endif
