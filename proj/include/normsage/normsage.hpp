#pragma once

#include "normsage/common.hpp"
#include "normsage/evalharness.hpp"
#include "normsage/extraction.hpp"
#include "normsage/ingest.hpp"
#include "normsage/kb_service.hpp"
#include "normsage/llm_backend.hpp"
#include "normsage/normskb.hpp"
#include "normsage/openai_client.hpp"
#include "normsage/pipeline.hpp"
#include "normsage/templates.hpp"
#include "normsage/verification.hpp"
