#ifndef SALFOLD_SALFOLD_HPP
#define SALFOLD_SALFOLD_HPP

#include "salfold/error.hpp"
#include "salfold/folding.hpp"
#include "salfold/image.hpp"
#include "salfold/irma.hpp"
#include "salfold/lbp.hpp"
#include "salfold/manifest.hpp"
#include "salfold/pipeline.hpp"
#include "salfold/saliency.hpp"
#include "salfold/svm.hpp"
#include "salfold/synth.hpp"
#include "salfold/util.hpp"

#endif
