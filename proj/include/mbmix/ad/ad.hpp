// Copyright 2026 The mbmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MBMIX_AD_AD_HPP_
#define MBMIX_AD_AD_HPP_

#include "mbmix/ad/backward.hpp"
#include "mbmix/ad/jvp.hpp"
#include "mbmix/ad/matrix.hpp"
#include "mbmix/ad/ops.hpp"
#include "mbmix/ad/tape.hpp"

#endif  // MBMIX_AD_AD_HPP_
