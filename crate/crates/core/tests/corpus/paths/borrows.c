#include <crusted.h>

int shared_then_write(int c) {
  int x = 1;
  const int *r = &x;
  if (c)
    x = 5;
  return *r;
}

int shared_dead(int c) {
  int x = 1;
  const int *r = &x;
  int y = *r;
  if (c)
    x = y + 1;
  return x;
}

void exclusive(int c) {
  int x = 0;
  int * e_excl q = &x;
  int y = x;
  if (c)
    *q = y;
}

void swap(int * e_excl a, int * e_excl b);

void swap_pair(int c) {
  int x = 1;
  int y = 2;
  if (c)
    swap(&x, &y);
  else
    swap(&x, &x);
}
