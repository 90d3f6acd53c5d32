#pragma once

#include "attestfl/error.hpp"
#include "attestfl/model/dataset.hpp"
#include "attestfl/model/network.hpp"
#include "attestfl/model/train.hpp"
#include "attestfl/trace/dump.hpp"
#include "attestfl/trace/expected.hpp"
#include "attestfl/trace/recorder.hpp"
#include "attestfl/tee/session.hpp"
#include "attestfl/protocol/client.hpp"
#include "attestfl/protocol/transport.hpp"
#include "attestfl/protocol/wire.hpp"
#include "attestfl/verifier.hpp"
#include "attestfl/aggregation.hpp"
#include "attestfl/adversary.hpp"
#include "attestfl/harness/config.hpp"
#include "attestfl/harness/experiment.hpp"
#include "attestfl/harness/results.hpp"
#include "attestfl/harness/overhead.hpp"
#include "attestfl/harness/matrix.hpp"
