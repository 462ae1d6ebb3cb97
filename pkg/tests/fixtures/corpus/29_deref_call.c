static double half(double x) { return x / 2; }

double apply_twice(double (*fp)(double), double x)
{
    return (*fp)((*fp)(x));
}

double run(void)
{
    double (*local)(double) = half;
    return (*local)(8.0) + apply_twice(half, 4.0);
}
