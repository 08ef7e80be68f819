#pragma once

#include "netaudit/common.hpp"
#include "netaudit/packet.hpp"
#include "netaudit/pcap.hpp"
#include "netaudit/session.hpp"
#include "netaudit/ingest.hpp"
#include "netaudit/encode.hpp"
#include "netaudit/ranker.hpp"
#include "netaudit/taxonomy.hpp"
#include "netaudit/kde.hpp"
#include "netaudit/validators.hpp"
#include "netaudit/occlusion.hpp"
#include "netaudit/tree.hpp"
#include "netaudit/evaluator.hpp"
#include "netaudit/synthgen.hpp"
#include "netaudit/report.hpp"
#include "netaudit/pipeline.hpp"
