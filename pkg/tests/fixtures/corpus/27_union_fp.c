union callback {
    void (*on_int)(int v);
    void (*on_ptr)(void *p);
};

static void print_int(int v) { }
static void free_ptr(void *p) { }

void dispatch(int tag, union callback cb, int v, void *p)
{
    if (tag)
        cb.on_int(v);
    else
        cb.on_ptr(p);
}

void wire(void)
{
    union callback a, b;
    a.on_int = print_int;
    b.on_ptr = free_ptr;
    dispatch(1, a, 1, 0);
    dispatch(0, b, 0, 0);
}
