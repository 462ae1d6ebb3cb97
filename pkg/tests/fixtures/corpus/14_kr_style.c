static int old_add(a, b)
    int a;
    int b;
{
    return a + b;
}

static int new_add(int a, int b) { return a + b; }

int call_it(int (*f)(), int x)
{
    return f(x, x);
}

int main(void)
{
    return call_it(old_add, 1) + call_it(new_add, 2);
}
