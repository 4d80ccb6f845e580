#pragma once

#include <string>
#include <vector>

namespace qsi
{
struct FringePoint
{
    double detuning_hz = 0;
    double y = 0;      //!< counts or probability
    double sigma = 0;  //!< one-sigma uncertainty of y
};

//! Ramsey fringe measurement for one signal class.
struct FringeData
{
    std::vector<FringePoint> points;
    double interrogation_time = 0;  //!< T [s]
    std::string label;
};
}  // namespace qsi
