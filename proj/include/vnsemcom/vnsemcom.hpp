#pragma once

#include "vnsemcom/auditgame.hpp"
#include "vnsemcom/camouflage.hpp"
#include "vnsemcom/channel.hpp"
#include "vnsemcom/classify.hpp"
#include "vnsemcom/codec.hpp"
#include "vnsemcom/dataset.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/experiments.hpp"
#include "vnsemcom/fedtrain.hpp"
#include "vnsemcom/net.hpp"
#include "vnsemcom/report.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/scenario.hpp"
#include "vnsemcom/ssim.hpp"
#include "vnsemcom/tensor.hpp"
