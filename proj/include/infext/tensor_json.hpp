#pragma once

#include <nlohmann/json.hpp>

#include "infext/tensor.hpp"

namespace infext {

// {"shape": [...], "data": [...]}
template <typename Scalar>
nlohmann::json tensor_to_json(const Tensor<Scalar>& t) {
  return {{"shape", t.shape()}, {"data", t.to_vector()}};
}

template <typename Scalar>
Tensor<Scalar> tensor_from_json(const nlohmann::json& j) {
  return Tensor<Scalar>(j.at("shape").get<Shape>(),
                        j.at("data").get<std::vector<Scalar>>());
}

}  // namespace infext
