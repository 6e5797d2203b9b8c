#pragma once

#include <vector>

#include "vrprl/instances.hpp"

namespace fixtures {

// Sample VRP10 instances with their printed solutions; customers 0..9,
// depot index 10.
inline vrprl::ProblemInstance sample_a() {
  vrprl::ProblemInstance in;
  in.id = "sample-a";
  in.capacity = 20;
  in.depot = {0.890, 0.252};
  const double xy[10][2] = {{0.411, 0.559}, {0.874, 0.302}, {0.029, 0.127}, {0.188, 0.979}, {0.812, 0.330},
                            {0.999, 0.505}, {0.926, 0.705}, {0.508, 0.739}, {0.424, 0.201}, {0.314, 0.140}};
  const int d[10] = {2, 4, 5, 9, 5, 3, 8, 2, 3, 2};
  for (int i = 0; i < 10; ++i) in.customers.push_back({{xy[i][0], xy[i][1]}, d[i]});
  return in;
}

inline vrprl::ProblemInstance sample_b() {
  vrprl::ProblemInstance in;
  in.id = "sample-b";
  in.capacity = 20;
  in.depot = {0.204, 0.091};
  const double xy[10][2] = {{0.253, 0.720}, {0.289, 0.725}, {0.132, 0.131}, {0.050, 0.609}, {0.780, 0.549},
                            {0.014, 0.920}, {0.624, 0.655}, {0.707, 0.311}, {0.396, 0.749}, {0.468, 0.579}};
  const int d[10] = {5, 6, 3, 1, 9, 8, 9, 8, 7, 7};
  for (int i = 0; i < 10; ++i) in.customers.push_back({{xy[i][0], xy[i][1]}, d[i]});
  return in;
}

inline const std::vector<int> kSampleAOptimal = {10, 1, 10, 2, 3, 8, 9, 10, 0, 4, 5, 6, 7, 10};
inline const std::vector<int> kSampleAGreedy = {10, 5, 6, 4, 1, 10, 7, 3, 0, 8, 9, 10, 2, 10};
inline const std::vector<int> kSampleBSplit = {10, 7, 4, 9, 10, 9, 6, 8, 10, 1, 0, 5, 3, 10, 2, 10};

}  // namespace fixtures
