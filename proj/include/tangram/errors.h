#pragma once

#include <stdexcept>
#include <string>

namespace tangram {

// Base of every error raised by the library. The concrete type names the
// failure; what() carries the context.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

#define TANGRAM_DEFINE_ERROR(Name)                                    \
    class Name : public Error                                         \
    {                                                                 \
    public:                                                           \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

// road network
TANGRAM_DEFINE_ERROR(SchemaError);
TANGRAM_DEFINE_ERROR(DanglingLink);
TANGRAM_DEFINE_ERROR(EmptyNetwork);
TANGRAM_DEFINE_ERROR(Unreachable);

// demand
TANGRAM_DEFINE_ERROR(InconsistentSpec);
TANGRAM_DEFINE_ERROR(BrokenChain);
TANGRAM_DEFINE_ERROR(TooFewPoints);

// fleets
TANGRAM_DEFINE_ERROR(NoVehicle);
TANGRAM_DEFINE_ERROR(NoDestinationSlot);
TANGRAM_DEFINE_ERROR(UnknownReservation);
TANGRAM_DEFINE_ERROR(DanglingReservation);

// scoring / analytics / runner
TANGRAM_DEFINE_ERROR(UnknownMode);
TANGRAM_DEFINE_ERROR(EmptyLog);
TANGRAM_DEFINE_ERROR(ConfigError);
TANGRAM_DEFINE_ERROR(BindError);

#undef TANGRAM_DEFINE_ERROR

} // namespace tangram
