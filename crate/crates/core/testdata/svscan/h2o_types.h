#ifndef H2O_TYPES_H
#define H2O_TYPES_H

typedef enum enum_h2o_http2_stream_state_t {
    H2O_HTTP2_STREAM_STATE_IDLE,
    H2O_HTTP2_STREAM_STATE_RECV_HEADERS,
    H2O_HTTP2_STREAM_STATE_RECV_BODY,
    H2O_HTTP2_STREAM_STATE_REQ_PENDING,
    H2O_HTTP2_STREAM_STATE_SEND_HEADERS,
    H2O_HTTP2_STREAM_STATE_SEND_BODY,
    H2O_HTTP2_STREAM_STATE_SEND_BODY_IS_FINAL,
    H2O_HTTP2_STREAM_STATE_END_STREAM
} h2o_http2_stream_state_t;

typedef enum {
    H2O_HTTP2_ERROR_NONE = 0,
    H2O_HTTP2_ERROR_PROTOCOL = -1,
    H2O_HTTP2_ERROR_INTERNAL = -2,
    H2O_HTTP2_ERROR_FLOW_CONTROL = -3
} h2o_http2_error_t;

typedef struct st_h2o_http2_stream_t {
    unsigned id;
    h2o_http2_stream_state_t state;
} h2o_http2_stream_t;

typedef struct st_h2o_http2_conn_t {
    h2o_http2_stream_t *stream;
    h2o_http2_error_t last_error;
} h2o_http2_conn_t;

#endif
