#include "duodet/cli/app.hpp"

int main(int argc, char** argv)
{
    return duodet::dispatch(argc, argv);
}
