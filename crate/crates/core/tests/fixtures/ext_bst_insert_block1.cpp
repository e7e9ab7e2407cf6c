struct node * internal = (struct node *) malloc(sizeof(struct node));
struct node * target = (struct node *) malloc(sizeof(struct node));
internal->left = NULL; internal->right = NULL; target->left = NULL; target->right = NULL;
internal->key = curr->key; target->key = key;
parent->mtx.lock(); target->mtx.lock(); internal->mtx.lock(); curr->mtx.lock();
if(!(reachable(parent) && parent->left == curr && curr->left == NULL && curr->right == NULL)){
parent->mtx.unlock(); target->mtx.unlock(); internal->mtx.unlock();
curr->mtx.unlock();
continue;
}
internal->left = target; internal->right = curr; parent->left = internal;
parent->mtx.unlock(); target->mtx.unlock(); internal->mtx.unlock();
curr->mtx.unlock();
