enum query_state { Q_NEW, Q_SENT, Q_ANSWERED, Q_TIMED_OUT };
enum dns_rcode { RCODE_NOERROR = 0, RCODE_FORMERR = 1, RCODE_SERVFAIL = 2, RCODE_NXDOMAIN = 3 };

struct query {
    enum query_state state;
    enum dns_rcode rcode;
    int retries;
};

void query_send(struct query *q)
{
    q->retries++;
    q->state = Q_SENT;
}

void query_answer(struct query *q, int code)
{
    if (code == 3)
        q->rcode = RCODE_NXDOMAIN;
    else
        q->rcode = RCODE_NOERROR;
    q->state = Q_ANSWERED;
}

void query_timeout(struct query *q)
{
    if (q->retries > 3) {
        q->rcode = RCODE_SERVFAIL;
        q->state = Q_TIMED_OUT;
    } else {
        q->state = Q_NEW;
    }
}
