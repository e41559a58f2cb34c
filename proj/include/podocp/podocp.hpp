#ifndef PODOCP_PODOCP_HPP
#define PODOCP_PODOCP_HPP

#include "podocp/affine.hpp"
#include "podocp/cases.hpp"
#include "podocp/fem.hpp"
#include "podocp/io.hpp"
#include "podocp/mesh.hpp"
#include "podocp/model.hpp"
#include "podocp/pipeline.hpp"
#include "podocp/pod.hpp"
#include "podocp/rom.hpp"
#include "podocp/spacetime.hpp"

#endif  // PODOCP_PODOCP_HPP
