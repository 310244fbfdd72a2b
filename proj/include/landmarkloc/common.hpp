#pragma once

#include <stdexcept>
#include <string>

namespace lloc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define LLOC_DEFINE_ERROR(Name)                  \
    struct Name : Error {                        \
        using Error::Error;                      \
        Name() : Error(#Name) {}                 \
    }

// geometry
LLOC_DEFINE_ERROR(DegenerateDepth);
LLOC_DEFINE_ERROR(NoConvergence);

// features
LLOC_DEFINE_ERROR(DimensionMismatch);
LLOC_DEFINE_ERROR(EmptyIndex);
LLOC_DEFINE_ERROR(TooFewTrainDescriptors);
LLOC_DEFINE_ERROR(EmptyHistogram);

// robust
LLOC_DEFINE_ERROR(InvalidRatio);
LLOC_DEFINE_ERROR(NotEnoughData);
LLOC_DEFINE_ERROR(NoModelFound);
LLOC_DEFINE_ERROR(TooFewPoints);
LLOC_DEFINE_ERROR(DegenerateConfiguration);

// mapping
LLOC_DEFINE_ERROR(CheiralityViolation);
LLOC_DEFINE_ERROR(DegenerateBaseline);
LLOC_DEFINE_ERROR(SeedDegenerate);
LLOC_DEFINE_ERROR(RegistrationStalled);
LLOC_DEFINE_ERROR(SingularNormalEquations);
LLOC_DEFINE_ERROR(MissingDescriptor);
LLOC_DEFINE_ERROR(TooFewPairs);
LLOC_DEFINE_ERROR(CollinearPoints);
LLOC_DEFINE_ERROR(UnsupportedCameraModel);

// tracking
LLOC_DEFINE_ERROR(EmptyHistory);

// evaluation
LLOC_DEFINE_ERROR(CollinearDegenerate);
LLOC_DEFINE_ERROR(TooFewObservations);
LLOC_DEFINE_ERROR(SingularSystem);

// simulation
LLOC_DEFINE_ERROR(PackingFailure);

#undef LLOC_DEFINE_ERROR

// I/O errors carry the offending line number.
struct ParseError : Error {
    int line = 0;
    ParseError(const std::string& msg, int line_number)
        : Error(msg + " (line " + std::to_string(line_number) + ")"), line(line_number) {}
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

}  // namespace lloc
