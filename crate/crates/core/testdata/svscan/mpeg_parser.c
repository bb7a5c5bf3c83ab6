enum ps_parse_state {
    PS_IDLE = 0,
    PS_PACK_HEADER = 0x10,
    PS_SYSTEM_HEADER,
    PS_PES = PS_SYSTEM_HEADER + 4,
    PS_END = 1 << 6
};

struct ps_demux {
    enum ps_parse_state state;
    unsigned consumed;
};

int ps_feed(struct ps_demux *ctx, const unsigned char *p, int n)
{
    while (n-- > 0) {
        switch (ctx->state) {
        case PS_IDLE:
            if (*p == 0xBA) ctx->state = PS_PACK_HEADER;
            break;
        case PS_PACK_HEADER:
            ctx->state = PS_SYSTEM_HEADER;
            break;
        case PS_SYSTEM_HEADER:
            ctx->state = PS_PES;
            break;
        default:
            ctx->state = PS_END;
        }
        ctx->consumed++;
        p++;
    }
    return 0;
}
