typedef struct dns_rdataset dns_rdataset_t;
struct dns_rdataset { int count; void (*disassociate)(dns_rdataset_t *r); };

static void rdataset_disassociate(dns_rdataset_t *r) { r->count = 0; }
static void noop_disassociate(dns_rdataset_t *r) { }

static struct dns_rdataset proto = { 0, rdataset_disassociate };

void dns_rdataset_clear(dns_rdataset_t *rdataset DNS__FLARG)
{
    rdataset->disassociate(rdataset);
}

void reset(void)
{
    dns_rdataset_t *rdataset DNS__FLARG;
    rdataset = &proto;
    rdataset->disassociate = noop_disassociate;
}
