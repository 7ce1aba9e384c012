#pragma once

#include <torch/torch.h>

// c10 logging defines its own CHECK; doctest's takes over inside tests.
#undef CHECK
#include <doctest.h>
