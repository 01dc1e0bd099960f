// Copyright 2026 The slim Authors. All Rights Reserved.
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

#pragma once

#include <string>

#include "slim/tensor.hpp"

namespace slim {

/// One SGD update with heavy-ball momentum:
///   velocity <- momentum * velocity + grad
///   param    <- param - lr * velocity
/// With momentum 0 this reduces to param <- param - lr * grad.
template <typename Scalar>
void sgd_step(Eigen::Ref<Vector<Scalar>> param, const Eigen::Ref<const Vector<Scalar>>& grad,
              Eigen::Ref<Vector<Scalar>> velocity, Scalar lr, Scalar momentum) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw ShapeError("sgd: parameter/gradient/velocity lengths differ (" + std::to_string(param.size()) + ", " +
                     std::to_string(grad.size()) + ", " + std::to_string(velocity.size()) + ")");
  }
  if (!(lr > Scalar(0))) throw ArgumentError("sgd: learning rate must be positive");
  if (!(momentum >= Scalar(0) && momentum < Scalar(1))) throw ArgumentError("sgd: momentum must lie in [0, 1)");
  if (momentum == Scalar(0)) {
    param -= lr * grad;
    return;
  }
  velocity = momentum * velocity + grad;
  param -= lr * velocity;
}

}  // namespace slim
