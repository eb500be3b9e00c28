#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#ifdef __GLIBC__
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#ifdef __GLIBC__
  mallopt(M_TOP_PAD, 16 << 20);
#endif
  doctest::Context context(argc, argv);
  return context.run();
}
